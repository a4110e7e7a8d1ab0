from django.apps import AppConfig


class SpeakerXConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'speakerx'
    verbose_name = "Target speaker extraction for speaker verification"
