import sys

from django.core.management.base import BaseCommand, CommandError

from scanner.cli import EXIT_CLEAN, add_scan_arguments, config_from_options, execute, main


class Command(BaseCommand):
    help = 'Scan Android APKs for the fourteen banking-app vulnerability rules'

    def run_from_argv(self, argv):
        # argv is [prog, 'androscan', ...]; the scanner owns its own flags and exit codes.
        sys.exit(main(argv[2:], self.stdout, self.stderr))

    def add_arguments(self, parser):
        add_scan_arguments(parser, with_help=False)

    def handle(self, *args, **options):
        config = config_from_options(options)
        code = execute(config, self.stdout, self.stderr)
        if code != EXIT_CLEAN:
            raise CommandError(f'androscan finished with exit code {code}', returncode=code)
