#!/usr/bin/env python
"""Point d'entrée Django : tests et `manage.py localizer <sous-commande>`."""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'Project.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Django introuvable. Installez requirements.txt dans l'environnement "
            "virtuel actif avant de lancer le localisateur."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
