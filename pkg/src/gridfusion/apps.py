from django.apps import AppConfig


class GridFusionConfig(AppConfig):
    name = "gridfusion"
    verbose_name = "Generalized sensor fusion"
