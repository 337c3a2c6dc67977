"""Feature selection with a differentiable binary mask, plus filter baselines."""

try:
    from . import _e2efs as _ext
except ImportError:  # in-tree build: the extension sits next to, not inside, this package
    import _e2efs as _ext

__version__ = _ext.__version__

alpha_schedule = _ext.alpha_schedule
balanced_accuracy = _ext.balanced_accuracy
effective_M = _ext.effective_M
erf_normalize = _ext.erf_normalize
fisher_scores = _ext.fisher_scores
l12_loss = _ext.l12_loss
lM_loss = _ext.lM_loss
make_synthetic = _ext.make_synthetic
mim_scores = _ext.mim_scores
reg_gradient = _ext.reg_gradient
relieff_scores = _ext.relieff_scores
select = _ext.select

if hasattr(_ext, "run_cli"):
    run_cli = _ext.run_cli
