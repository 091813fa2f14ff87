"""smarlab: a desk-scale sparse mixture-of-experts routing laboratory.

The package trains a toy multimodal MoE classifier on synthetic
modality-labelled data and studies how a tolerance-band loss on the
symmetric KL distance between per-modality routing distributions steers
expert specialisation. Sub-modules:

    autodiff   reverse-mode engine over dense 2-D float64 tensors
    kernels    top-k selection / selection counting (Cython or numpy)
    router     modality-biased linear router
    mrd        modality routing distribution statistics
    losses     tolerance-band, load-balance, cross-entropy, composition
    model      the toy mixture-of-experts classifier
    data       synthetic two-modality cluster data
    trainer    SGD training loop, evaluation, metrics logs
    analysis   post-hoc routing diagnostics and CSV reports
    cli        the `smarlab` command line
"""

__version__ = "0.1.0"
