from .api_routes import api_bp

__all__ = ["api_bp"]
