"""Kerr spacetimes: dual metric, null flow, trapped set, rates and stable manifolds."""

from .closed_form import closed_form_G, closed_form_gradient, closed_form_hamilton
from .flow import (ExpansionRates, TrappedPoint, default_trapped_point, expansion_rates,
                   hamilton_field, hamilton_vector_field, radial_potential_root,
                   rescaled_hamilton, trapped_residuals, trapped_set_solve)
from .manifold import EquatorialChart, field_perturbation_decay, kerr_stable_manifold
from .metric import (DualMetric, KerrDualMetric, KerrParams, PhasePoint, dual_metric_value,
                     kerr_inverse_components, kerr_metric_components, metric)
from .perturbation import (CharacteristicGraph, MetricPerturbation, PerturbedDualMetric,
                           characteristic_graph, perturbed_dual_metric,
                           signature_loss_amplitude)

__all__ = [
    "CharacteristicGraph", "DualMetric", "EquatorialChart", "ExpansionRates", "KerrDualMetric",
    "KerrParams", "MetricPerturbation", "PerturbedDualMetric", "PhasePoint", "TrappedPoint",
    "characteristic_graph", "closed_form_G", "closed_form_gradient", "closed_form_hamilton",
    "default_trapped_point", "dual_metric_value", "expansion_rates", "field_perturbation_decay",
    "hamilton_field", "hamilton_vector_field", "kerr_inverse_components",
    "kerr_metric_components", "kerr_stable_manifold", "metric", "perturbed_dual_metric",
    "radial_potential_root", "rescaled_hamilton", "signature_loss_amplitude",
    "trapped_residuals", "trapped_set_solve",
]
