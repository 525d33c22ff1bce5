class ReportError(Exception):
    pass


class DuplicateAppName(ReportError):
    pass


class EmptyFleet(ReportError):
    pass
