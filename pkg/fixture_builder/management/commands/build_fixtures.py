from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from fixture_builder.builder import write_fixture
from fixture_builder.golden import GOLDEN_PATH, write_golden
from fixture_builder.profiles import bank_fleet, rule_corpus


class Command(BaseCommand):
    help = 'Write the synthetic fleet and rule-corpus APKs to disk'

    def add_arguments(self, parser):
        parser.add_argument('--output', default=None,
                            help='target directory (default: settings.FIXTURE_OUTPUT_DIR)')
        parser.add_argument('--fleet-only', action='store_true',
                            help='only write the six banking-app fixtures')
        parser.add_argument('--write-golden', action='store_true',
                            help='refresh the payload digests in data/golden_hashes.json')

    def handle(self, *args, **options):
        output = Path(options['output'] or settings.FIXTURE_OUTPUT_DIR)
        self.stdout.write(self.style.SUCCESS(f'Writing fixtures to {output}...'))

        fleet = bank_fleet()
        for profile in fleet:
            path = write_fixture(profile, output / 'fleet')
            self.stdout.write(self.style.SUCCESS(f'✓ Fleet fixture written: {path.name}'))

        if not options['fleet_only']:
            for profile in rule_corpus():
                path = write_fixture(profile, output / 'corpus')
                self.stdout.write(self.style.SUCCESS(f'✓ Corpus fixture written: {path.name}'))

        if options['write_golden']:
            hashes = write_golden()
            self.stdout.write(self.style.WARNING(f'\nGolden digests refreshed for {len(hashes)} fixtures'))
            self.stdout.write(self.style.WARNING(f'  {GOLDEN_PATH}'))

        self.stdout.write(self.style.SUCCESS('\n✓ Fixture build completed successfully!'))
