"""
URL configuration for nudgeproject project.

Run records are browsed through the admin only.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
