"""ragebench: a rage-music genre classification workbench.

Audio feature extraction, from-scratch classifier families, evaluation
protocol (stratified splits, cross-validated grid search), and model
interpretability artifacts (SHAP, PDP, MDI, embeddings), end to end on a
deterministic synthetic corpus or user-supplied labeled WAV files.
"""

__version__ = "0.1.0"
