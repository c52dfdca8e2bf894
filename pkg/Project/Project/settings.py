"""
Django settings for the policy fault localizer.

Le projet n'expose pas d'API HTTP : Django fournit la configuration, le
lanceur de commandes (manage.py localizer ...) et le runner de tests.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import json
import os
from pathlib import Path

import structlog
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Charger les variables d'environnement (.env à la racine du dépôt)
env_path = os.path.join(BASE_DIR.parent, '.env')
if os.path.exists(env_path):
    load_dotenv(env_path)
else:
    # Fallback si lancé depuis le dossier Project
    load_dotenv(os.path.join(BASE_DIR, '.env'))


# ===================================
# VALIDATION DES VARIABLES CRITIQUES
# ===================================
def get_required_env(key: str, default=None):
    """
    Récupère une variable d'environnement.
    Si default=None, lève une erreur si la variable n'existe pas.
    """
    value = os.getenv(key, default)
    if value is None:
        raise ValueError(
            f"Variable d'environnement manquante: {key}\n"
            f"Vérifiez que votre fichier .env contient cette variable."
        )
    return value


def _load_config_file(path):
    """
    Charge le fichier de configuration JSON désigné par LOCALIZER_CONFIG_PATH.
    Les clés sont les noms de réglages sans le préfixe, en minuscules.
    """
    if not path:
        return {}
    if not os.path.exists(path):
        raise ValueError(f"Fichier de configuration introuvable: {path}")
    with open(path, encoding='utf-8') as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"Le fichier de configuration doit contenir un objet JSON: {path}")
    return {str(key).lower(): value for key, value in data.items()}


LOCALIZER_CONFIG_PATH = os.getenv('LOCALIZER_CONFIG_PATH', '')
_file_config = _load_config_file(LOCALIZER_CONFIG_PATH)


def get_setting(key: str, default):
    """
    Priorité: variable d'environnement > fichier de configuration > défaut.
    """
    env_value = os.getenv(f'LOCALIZER_{key.upper()}')
    if env_value is not None:
        return env_value
    return _file_config.get(key.lower(), default)


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = get_required_env('SECRET_KEY', 'localizer-insecure-dev-key')

DEBUG = os.getenv('DEBUG', 'False').lower() in ('true', '1', 'yes')


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'Policy',
    'Deployment',
    'Risk',
    'Localization',
    'Correlation',
    'Simulation',
    'Pipeline',
]

# Aucune vue n'est publiée : le moteur est piloté en ligne de commande
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': (),
    'DEFAULT_PERMISSION_CLASSES': (),
    'UNAUTHENTICATED_USER': None,
}

# Database
# Les artefacts sont des fichiers JSON/CSV ; la base ne sert qu'au runner de tests.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'fr-fr'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ===================================
# LOCALISATION DE FAUTES
# ===================================
LOCALIZER_VERSION = '1.0.0'

# Fenêtre (en unités de timestamp) pour la recherche dans le journal des changements
LOCALIZER_CHANGE_WINDOW = int(get_setting('change_window', 10))
# 'all' : tous les objets récemment modifiés ; 'latest' : seulement le plus récent
LOCALIZER_CHANGE_SELECTION = str(get_setting('change_selection', 'all'))
LOCALIZER_SCORE_THRESHOLD = float(get_setting('score_threshold', 1.0))
LOCALIZER_CORRELATION_SLACK = int(get_setting('correlation_slack', 0))
LOCALIZER_SIGNATURES_PATH = str(get_setting('signatures_path', ''))

# Injection de fautes (simulation)
LOCALIZER_PARTIAL_FRACTION_MIN = float(get_setting('partial_fraction_min', 0.01))
LOCALIZER_PARTIAL_FRACTION_MAX = float(get_setting('partial_fraction_max', 0.95))
LOCALIZER_FULL_FAULT_MIX = float(get_setting('full_fault_mix', 0.5))
LOCALIZER_FAULTABLE_KINDS = [
    kind.strip() for kind in str(get_setting('faultable_kinds', 'EPG,Contract,Filter')).split(',')
    if kind.strip()
]
LOCALIZER_WORKERS = int(get_setting('workers', 1))

LOCALIZER_LOG_DIR = str(get_setting('log_dir', os.path.join(BASE_DIR, 'logs')))
LOCALIZER_LOG_LEVEL = str(get_setting('log_level', 'INFO')).upper()
os.makedirs(LOCALIZER_LOG_DIR, exist_ok=True)


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'json_formatter': {
            '()': structlog.stdlib.ProcessorFormatter,
            'processor': structlog.processors.JSONRenderer(),
        },
        'console_formatter': {
            '()': structlog.stdlib.ProcessorFormatter,
            'processor': structlog.dev.ConsoleRenderer(colors=True),
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'console_formatter',
        },
        'json_file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(LOCALIZER_LOG_DIR, 'structlog.json'),
            'formatter': 'json_formatter',
            'maxBytes': 10485760,  # 10MB
            'backupCount': 5,
        },
    },
    'loggers': {
        '': {
            'handlers': ['console', 'json_file'],
            'level': LOCALIZER_LOG_LEVEL,
            'propagate': True,
        },
    },
}

# Configuration structlog
structlog.configure(
    processors=[
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.processors.TimeStamper(fmt="%Y-%m-%d %H:%M:%S"),
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
    ],
    logger_factory=structlog.stdlib.LoggerFactory(),
    cache_logger_on_first_use=True,
)
