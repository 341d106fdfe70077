"""patentscape: patent landscaping with active learning.

Seed-set expansion over citation and CPC structure, from-scratch SVM and
neural classifiers, an uncertainty-sampling annotation loop, and an HTTP
annotation service.
"""

__version__ = "0.1.0"
