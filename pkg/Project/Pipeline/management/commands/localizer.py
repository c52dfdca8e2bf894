import argparse
import sys

from django.core.management.base import BaseCommand, CommandError

from Pipeline.cli import main


class Command(BaseCommand):
    help = "Localisation de fautes de politique : compile, check, build-model, localize, correlate, simulate, bench..."

    def add_arguments(self, parser):
        parser.add_argument('args', nargs=argparse.REMAINDER)

    def run_from_argv(self, argv):
        # manage.py localizer <sous-commande> ... : l'analyse revient à la CLI
        sys.exit(main(argv[2:]))

    def handle(self, *args, **options):
        code = main(list(args))
        if code:
            raise CommandError(f"localizer a échoué (code {code})", returncode=code)
