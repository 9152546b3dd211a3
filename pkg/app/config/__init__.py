from .settings import AuditSettings, settings, APP_NAME, APP_VERSION, APP_DESCRIPTION

__all__ = ["AuditSettings", "settings", "APP_NAME", "APP_VERSION", "APP_DESCRIPTION"]
