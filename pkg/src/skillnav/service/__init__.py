from skillnav.service.app import app, create_app

__all__ = ["app", "create_app"]
