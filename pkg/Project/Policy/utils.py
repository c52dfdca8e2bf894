import hashlib
import json
import os

import structlog

from .exceptions import PolicyParseError

logger = structlog.get_logger(__name__)


class IOUtils:
    """
    Classe utilitaire pour les fichiers d'artefacts (JSON, JSON lines).
    Toutes les méthodes sont statiques pour une utilisation facile.
    """

    @staticmethod
    def read_json(path, stage='policy'):
        """
        Lit un document JSON.

        Raises:
            PolicyParseError: fichier absent ou JSON invalide (avec ligne/colonne)
        """
        if not os.path.exists(path):
            raise PolicyParseError(f"Fichier introuvable: {path}", code='file_not_found', stage=stage)
        try:
            with open(path, encoding='utf-8') as handle:
                return json.load(handle)
        except json.JSONDecodeError as exc:
            raise PolicyParseError(
                f"{path}: JSON invalide ligne {exc.lineno}, colonne {exc.colno}: {exc.msg}",
                stage=stage,
            ) from exc

    @staticmethod
    def read_json_lines(path, stage='policy'):
        """
        Lit un fichier JSON lines (une valeur par ligne, lignes vides ignorées).

        Returns:
            list: tuples (numéro de ligne, objet décodé)
        """
        if not os.path.exists(path):
            raise PolicyParseError(f"Fichier introuvable: {path}", code='file_not_found', stage=stage)
        records = []
        with open(path, encoding='utf-8') as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    records.append((line_number, json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise PolicyParseError(
                        f"{path}: ligne {line_number}: JSON invalide: {exc.msg}",
                        stage=stage,
                    ) from exc
        return records

    @staticmethod
    def write_json(data, path):
        IOUtils._ensure_parent(path)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(data, handle, indent=2, ensure_ascii=False)
            handle.write('\n')

    @staticmethod
    def write_json_lines(records, path):
        IOUtils._ensure_parent(path)
        with open(path, 'w', encoding='utf-8') as handle:
            for record in records:
                handle.write(json.dumps(record, ensure_ascii=False, separators=(',', ':')))
                handle.write('\n')

    @staticmethod
    def flatten_errors(detail, prefix=''):
        """
        Aplatit les erreurs imbriquées d'un serializer DRF.
        Exemple: {'epgs': [{}, {'vrf': ['Ce champ est obligatoire.']}]}
                 → ["epgs[1].vrf: Ce champ est obligatoire."]
        """
        messages = []
        if isinstance(detail, dict):
            for key, value in detail.items():
                if key == 'non_field_errors':
                    path = prefix
                else:
                    path = f"{prefix}.{key}" if prefix else str(key)
                messages.extend(IOUtils.flatten_errors(value, path))
        elif isinstance(detail, list):
            if all(not isinstance(item, (dict, list)) for item in detail):
                for item in detail:
                    messages.append(f"{prefix}: {item}" if prefix else str(item))
            else:
                for index, item in enumerate(detail):
                    messages.extend(IOUtils.flatten_errors(item, f"{prefix}[{index}]"))
        elif detail:
            messages.append(f"{prefix}: {detail}" if prefix else str(detail))
        return messages

    @staticmethod
    def file_digest(path):
        """Empreinte sha256 d'un fichier (utilisée par les manifestes)."""
        digest = hashlib.sha256()
        with open(path, 'rb') as handle:
            for chunk in iter(lambda: handle.read(65536), b''):
                digest.update(chunk)
        return digest.hexdigest()

    @staticmethod
    def _ensure_parent(path):
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)


# Instance globale
io_utils = IOUtils()
