import hashlib
import os

import pandas as pd
import structlog
from django.conf import settings

from Policy.exceptions import InputError
from Policy.utils import io_utils

logger = structlog.get_logger(__name__)

MANIFEST_SUFFIX = '.manifest.json'
DIRECTORY_MANIFEST = 'manifest.json'


class ManifestService:
    """
    Manifestes d'exécution : sous-commande, arguments, empreintes des
    entrées et des sorties, version de l'outil.
    """

    def __init__(self):
        self.version = getattr(settings, 'LOCALIZER_VERSION', '0.0.0')

    @staticmethod
    def artifact_digest(path):
        """
        Empreinte d'un artefact. Pour un CSV, les colonnes de durée (*_ms)
        sont ignorées : elles varient d'une exécution à l'autre.
        """
        if path.endswith('.csv'):
            frame = pd.read_csv(path)
            stable = frame[[column for column in frame.columns if not column.endswith('_ms')]]
            return hashlib.sha256(stable.to_csv(index=False).encode('utf-8')).hexdigest()
        return io_utils.file_digest(path)

    @staticmethod
    def manifest_path(out):
        if os.path.isdir(out):
            return os.path.join(out, DIRECTORY_MANIFEST)
        return f"{out}{MANIFEST_SUFFIX}"

    def build(self, subcommand, argv, inputs, outputs, seed, parameters):
        """
        Construit le manifeste d'une exécution.

        Args:
            subcommand: nom de la sous-commande
            argv: arguments d'origine (rejoués par replay)
            inputs: chemins des fichiers lus
            outputs: chemins des fichiers écrits
            seed: graine globale
            parameters: paramètres effectifs

        Returns:
            dict
        """
        return {
            'subcommand': subcommand,
            'argv': list(argv),
            'inputs': {path: self.artifact_digest(path) for path in sorted(inputs) if os.path.isfile(path)},
            'seeds': {'seed': seed},
            'parameters': parameters,
            'version': self.version,
            'outputs': {path: self.artifact_digest(path) for path in sorted(outputs)},
        }

    def write(self, out, manifest):
        path = self.manifest_path(out)
        io_utils.write_json(manifest, path)
        logger.info("manifest_written", path=path, outputs=len(manifest['outputs']))
        return path

    @staticmethod
    def load(path):
        data = io_utils.read_json(path, stage='replay')
        required = ('subcommand', 'argv', 'outputs')
        missing = [key for key in required if key not in data]
        if missing:
            raise InputError(f"{path}: clés manquantes: {', '.join(missing)}", stage='replay')
        return data

    def compare(self, manifest):
        """
        Compare les empreintes des sorties actuelles à celles du manifeste.

        Returns:
            list: chemins dont l'empreinte diffère (ou absents)
        """
        mismatches = []
        for path, expected in sorted(manifest['outputs'].items()):
            if not os.path.isfile(path) or self.artifact_digest(path) != expected:
                mismatches.append(path)
        return mismatches


# Instance globale du service
manifest_service = ManifestService()
