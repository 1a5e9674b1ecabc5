"""
WSGI config for nudgeproject project.

It exposes the WSGI callable as a module-level variable named ``application``;
only the admin is served.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'nudgeproject.settings')

application = get_wsgi_application()
