from django.apps import AppConfig


class RulesConfig(AppConfig):
    name = 'rules'
    verbose_name = 'Vulnerability Rules'

    def ready(self):
        # Fail at startup, not halfway through a scan, when the KB file is bad.
        from .knowledge import knowledge_base
        knowledge_base()
