import os


def reports_dir():
    """Directory served under /reports"""
    path = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), "reports")
    os.makedirs(path, exist_ok=True)
    return path
