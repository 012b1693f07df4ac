from typing import Optional

from flask import Flask

from .config import configure_logging, get_settings
from .routes import api_bp


def create_app(config_name: Optional[str] = None) -> Flask:
    settings = get_settings(config_name)
    configure_logging(settings)

    app = Flask(__name__)
    app.config["DIDLAB_SETTINGS"] = settings
    app.config["TESTING"] = settings.env == "testing"
    app.register_blueprint(api_bp)
    return app


if __name__ == '__main__':
    settings = get_settings()
    create_app().run(host=settings.api_host, port=settings.api_port)
