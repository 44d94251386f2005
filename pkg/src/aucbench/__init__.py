"""Deep AUROC maximization: surrogate losses, optimizers and a benchmark harness."""
from .metrics import auroc, auroc_bruteforce

__version__ = "0.1.0"
__all__ = ["auroc", "auroc_bruteforce", "__version__"]
