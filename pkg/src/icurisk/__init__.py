"""Survival-risk modeling toolkit for short-term ICU mortality.

Cohort filtering, KNN imputation, two-stage feature selection,
threshold-weighted SMOTE for continuous targets, logistic and Cox model
fitting, metric evaluation, interpretability, and point-scale nomogram
export for a client-side risk calculator.
"""

__version__ = "0.1.0"
