"""
URL configuration: the admin site is the only web surface, for browsing solver runs.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
