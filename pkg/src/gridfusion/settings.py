"""Django settings for running the gridfusion management commands.

There is no database, no URL configuration and no web surface; Django is
only used to discover and dispatch the commands.
"""
INSTALLED_APPS = ['gridfusion']

DATABASES = {}

# gridfusion.management.base configures logging from --verbosity
LOGGING_CONFIG = None

USE_TZ = True
