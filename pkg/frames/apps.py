import atexit
import json
import logging
from django.apps import AppConfig


logger = logging.getLogger('frames')


class FramesConfig(AppConfig):
    name = 'frames'
    verbose_name = 'Gabor frames'

    def ready(self):
        """Called when Django starts up"""
        from . import __version__
        logger.info(json.dumps({"event": "frames_ready", "version": __version__}))

        atexit.register(self._shutdown_handler)

        # Import signal receivers
        from . import signals  # noqa: F401

    def _shutdown_handler(self):
        """Called when the process exits"""
        logger.info(json.dumps({"event": "frames_stopped"}))
