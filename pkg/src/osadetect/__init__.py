"""Online obstructive sleep apnea detection from single-lead ECG and SpO2.

Classifies non-overlapping 1-minute frames of two-channel recordings
(ECG + pulse oximetry) as apnoeic or normal.  Pipeline stages: record
ingestion, preprocessing, per-frame feature extraction, mutual-information
feature selection, supervised classification, and three-member classifier
fusion.
"""

__version__ = "0.1.0"
