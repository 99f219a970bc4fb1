"""uda-forge: self-training domain adaptation for semantic segmentation.

Training recipe: an EMA teacher pseudo-labels the unlabeled target domain,
cross-domain class mixing and masked-view consistency supervise the student on
those labels, and a frozen reference extractor anchors token features on both
domains. The model couples a ViT token encoder to a convolutional multi-scale
adapter and a channel-shrinking pyramid decoder. A procedural two-domain
benchmark makes the whole pipeline verifiable on a CPU in minutes.
"""

__version__ = "0.1.0"
