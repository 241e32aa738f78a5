"""Planar pressure sensing for a compliant two-finger gripper.

Modules: ``pressure`` (images, force, quantization), ``geometry``
(homographies and warping), ``metrics`` (IoUs and errors), ``sim``
(contact simulator), ``estimator`` (oracle, noisy and replayed estimates),
``control`` (force servo, visual servo, grasp state machine) and
``harness`` (seeded experiments and reports).
"""

__version__ = "0.1.0"
