"""Gender classification from periocular NIR images.

Modules: ``imagecore`` (PGM/PPM codec, resizing, occlusion), ``dataset``
(manifests and person-disjoint splits), ``features`` (intensity, ULBP, HOG,
fusion), ``learn`` (SVM, trees, ensembles, boosted trees), ``relevance``
(gain importance and selection), ``evaluation`` (metrics and
cross-validation), ``fanova`` (bootstrap functional ANOVA), ``synth``
(synthetic benchmark) and ``cli``.
"""

__version__ = "0.1.0"
