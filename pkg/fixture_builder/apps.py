from django.apps import AppConfig


class FixtureBuilderConfig(AppConfig):
    name = 'fixture_builder'
    verbose_name = 'Synthetic APK Fixtures'
