"""
Method table and task set-up: which integrator and structure each method uses,
which model each task samples, and how protocol defaults are resolved.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from noncanonical_hmc.config_models import (
    ExperimentSpec,
    IntegratorConfig,
    IntegratorKind,
    Method,
    ProtocolConfig,
    SamplerConfig,
    StructureSpec,
    Task,
    TaskProtocol,
    VariantTag,
)
from noncanonical_hmc.models.base import TargetModel
from noncanonical_hmc.models.fitzhugh_nagumo import (
    fitzhugh_nagumo_model,
    load_fn_data,
    simulate_fn_data,
)
from noncanonical_hmc.models.gaussian import mixture_benchmark, standard_gaussian
from noncanonical_hmc.models.logistic import (
    fisher_sqrt_at_mode,
    load_dataset,
    logistic_regression,
)

logger = logging.getLogger(__name__)


class MethodSpec(NamedTuple):
    integrator: IntegratorKind
    variant: VariantTag


METHODS: dict[Method, MethodSpec] = {
    Method.CAN_LEAPFROG: MethodSpec(IntegratorKind.LEAPFROG, VariantTag.CANONICAL),
    Method.CAN_IMP: MethodSpec(IntegratorKind.IMPLICIT, VariantTag.CANONICAL),
    Method.MAG_POS_EXP: MethodSpec(
        IntegratorKind.EXPLICIT, VariantTag.MAGNETIC_POSITION
    ),
    Method.MAG_MOM_IMP: MethodSpec(
        IntegratorKind.IMPLICIT, VariantTag.MAGNETIC_MOMENTUM
    ),
    Method.MAG_MOM_EXP: MethodSpec(
        IntegratorKind.EXPLICIT, VariantTag.MAGNETIC_MOMENTUM
    ),
    Method.CMAG_IMP: MethodSpec(IntegratorKind.IMPLICIT, VariantTag.COUPLED_MAGNET),
    Method.CMAG_EXP: MethodSpec(IntegratorKind.EXPLICIT, VariantTag.COUPLED_MAGNET),
}


@dataclass(eq=False)
class TaskSetup:
    """A task's model, starting point and preconditioner A*, plus derived values
    worth recording in the manifest."""

    model: TargetModel
    initial_q: np.ndarray
    a_star: np.ndarray | None = None
    derived: dict[str, float | int | str] = field(default_factory=dict)


def build_task(spec: ExperimentSpec) -> TaskSetup:
    """Construct the target for a sampling task.

    Logistic regression starts at the posterior mode and is preconditioned by
    the square root of the information there; Fitzhugh-Nagumo starts at the true
    parameters.
    """
    if spec.task == Task.GAUSSIAN:
        dim = spec.dim or 2
        return TaskSetup(model=standard_gaussian(dim), initial_q=np.zeros(dim))
    if spec.task == Task.MIXTURE:
        return TaskSetup(model=mixture_benchmark(), initial_q=np.zeros(2))
    if spec.task == Task.LOGISTIC:
        features, labels = load_dataset(spec.dataset)
        model = logistic_regression(features, labels)
        mode = model.find_mode()
        return TaskSetup(
            model=model,
            initial_q=mode,
            a_star=fisher_sqrt_at_mode(model),
            derived={"n_train": model.n_train},
        )
    if spec.task == Task.FITZHUGH_NAGUMO:
        if spec.fn_data is not None:
            data = load_fn_data(spec.fn_data)
        else:
            data = simulate_fn_data(spec.seed, spec.observations or 200)
        model = fitzhugh_nagumo_model(data)
        return TaskSetup(
            model=model,
            initial_q=np.asarray(data.true_params, dtype=np.float64),
            derived={"n_observations": data.count},
        )
    raise ValueError(f"Task '{spec.task.value}' is not a sampling task")


def resolve_spec(
    spec: ExperimentSpec, protocol: ProtocolConfig, n_train: int | None = None
) -> ExperimentSpec:
    """Fill every unset field of ``spec`` from the task protocol."""
    task_protocol: TaskProtocol = protocol.task[spec.task]
    step_size = spec.step_size
    if step_size is None:
        if task_protocol.step_size_rule == "inverse-ten-n-train":
            if n_train is None:
                raise ValueError("The step-size rule needs the number of training rows")
            step_size = 1.0 / (10.0 * n_train)
        else:
            step_size = task_protocol.step_size
    updates = {
        "step_size": step_size,
        "method": spec.method or task_protocol.default_method,
        "n_steps": spec.n_steps or task_protocol.n_steps,
        "n_samples": spec.n_samples or task_protocol.n_samples,
        "n_chains": spec.n_chains or task_protocol.n_chains,
        "k": spec.k or task_protocol.k,
        "omega": spec.omega or task_protocol.omega,
        "omegas": spec.omegas or task_protocol.omegas,
        "dim": spec.dim or task_protocol.dim,
        "observations": spec.observations or task_protocol.observations,
    }
    return spec.model_copy(update=updates)


def structure_spec(
    variant: VariantTag, seed: int, k: int, a_star: np.ndarray | None
) -> StructureSpec:
    A = None if a_star is None else np.asarray(a_star).tolist()
    return StructureSpec(variant=variant, seed=seed, k=k, A=A)


def sampler_config(
    spec: ExperimentSpec,
    setup: TaskSetup,
    protocol: ProtocolConfig,
) -> SamplerConfig:
    """SamplerConfig for chain 0 of a resolved sampling spec."""
    if spec.method is None:
        raise ValueError(f"No method given for task '{spec.task.value}'")
    method = METHODS[spec.method]
    return SamplerConfig(
        integrator=method.integrator,
        structure=structure_spec(method.variant, spec.seed, spec.k, setup.a_star),
        integration=IntegratorConfig(
            step_size=spec.step_size, n_steps=spec.n_steps, omega=spec.omega
        ),
        n_samples=spec.n_samples,
        chain_seed=spec.chain_seed,
        flip_on_reject=spec.flip_on_reject,
        initial_q=setup.initial_q.tolist(),
        gram_schmidt_restarts=protocol.gram_schmidt_restarts,
    )
