"""Skip the trainer suite entirely when the trainer package is not installed."""

collect_ignore = []
try:
    import prior_trainer  # noqa: F401
    import torch  # noqa: F401
except ImportError:
    collect_ignore = ["test_trainer.py"]
