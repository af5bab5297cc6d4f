from app.commands import bound, catalogue, sweep, verify

__all__ = ["bound", "catalogue", "sweep", "verify"]
