"""Training sequences: downsample-and-rearrange, F2FL pairing, labels, normalisation, noise and splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.preprocessing import StandardScaler

from config.defaults import JOINT_NAMES, POLICY_FACTOR
from datakit.labels import LabelSpec, attach_label
from datakit.trace import MotionTrace
from mocopy.playback import rescale_trace

LOG = logging.getLogger(__name__)

SPLITS = ("train", "validation")


class DatasetError(ValueError):
    pass


def _joint_name(j: int) -> str:
    return JOINT_NAMES[j] if j < len(JOINT_NAMES) else f"joint{j}"


def input_names(n_joints: int) -> list[str]:
    names = [f"follower_{channel}_{_joint_name(j)}" for channel in ("theta", "omega", "tau") for j in range(n_joints)]
    return names + ["label"]


def target_names(n_joints: int) -> list[str]:
    return [
        f"{side}_{channel}_{_joint_name(j)}"
        for side in ("follower", "leader")
        for channel in ("theta", "omega", "tau")
        for j in range(n_joints)
    ]


@dataclass
class LabeledSequence:
    inputs: np.ndarray
    targets: np.ndarray
    trace_id: str
    ratio: float
    phase: int
    label: float
    variant: str = ""
    split: str = "train"

    @property
    def length(self) -> int:
        return int(self.inputs.shape[0])


@dataclass(frozen=True)
class NormStats:
    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    @classmethod
    def fit(cls, inputs: np.ndarray, targets: np.ndarray, n_joints: int | None = None) -> "NormStats":
        """Population mean/std per dimension; constant dimensions are rejected."""
        stats = []
        for values, names in ((inputs, input_names), (targets, target_names)):
            scaler = StandardScaler().fit(values)
            constant = np.flatnonzero(scaler.var_ <= 0.0)
            if constant.size:
                labels = names(n_joints) if n_joints is not None else None
                dims = [labels[i] if labels and i < len(labels) else str(i) for i in constant]
                raise DatasetError(f"constant dimension(s) in training data: {', '.join(dims)}")
            stats += [scaler.mean_.copy(), np.sqrt(scaler.var_)]
        return cls(*stats)

    def normalize_inputs(self, values: np.ndarray) -> np.ndarray:
        return (values - self.input_mean) / self.input_std

    def normalize_targets(self, values: np.ndarray) -> np.ndarray:
        return (values - self.target_mean) / self.target_std

    def denormalize_targets(self, values: np.ndarray) -> np.ndarray:
        return values * self.target_std + self.target_mean


@dataclass
class Dataset:
    """Normalised labelled sequences plus the statistics used to normalise them."""

    task: str
    n_joints: int
    norm: NormStats
    sequences: list[LabeledSequence] = field(default_factory=list)

    def split(self, name: str) -> list[LabeledSequence]:
        return [sequence for sequence in self.sequences if sequence.split == name]

    @property
    def input_dim(self) -> int:
        return 3 * self.n_joints + 1

    @property
    def output_dim(self) -> int:
        return 6 * self.n_joints

    def labels(self) -> list[float]:
        return sorted({sequence.label for sequence in self.sequences})

    def counts(self) -> dict[str, int]:
        return {name: len(self.split(name)) for name in SPLITS}


def downsample_rearrange(trace: MotionTrace, factor: int = POLICY_FACTOR) -> list[MotionTrace]:
    """Phase p keeps ticks p, p+factor, p+2*factor, ...; together the phases use every tick once."""
    if factor <= 0:
        raise DatasetError(f"downsample factor must be positive, got {factor}")
    if trace.n_ticks < factor:
        raise DatasetError(f"trace {trace.meta.trace_id!r} has {trace.n_ticks} ticks, fewer than factor {factor}")
    phases = []
    for phase in range(factor):
        sub = trace.take(slice(phase, None, factor))
        sub.dt = trace.dt * factor
        phases.append(sub)
    return phases


def sequence_arrays(trace: MotionTrace, label: float) -> tuple[np.ndarray, np.ndarray]:
    """Inputs at k (follower state + label) paired with targets at k+1 (follower + leader state)."""
    if trace.n_ticks < 2:
        raise DatasetError(f"sequence of {trace.n_ticks} samples is too short to pair")
    f, l = trace.follower, trace.leader
    state = np.hstack([f.theta, f.omega, f.tau])
    inputs = np.hstack([state[:-1], np.full((trace.n_ticks - 1, 1), float(label))])
    targets = np.hstack([state[1:], l.theta[1:], l.omega[1:], l.tau[1:]])
    return inputs, targets


def assign_splits(traces: list[MotionTrace], train_per_condition: int) -> list[str]:
    """First `train_per_condition` traces of each (variant, ratio) train, the rest validate."""
    seen: dict[tuple[str, float], int] = {}
    splits = []
    for trace in traces:
        key = (trace.meta.variant, float(trace.meta.ratio))
        index = seen.get(key, 0)
        seen[key] = index + 1
        splits.append("train" if index < train_per_condition else "validation")
    return splits


def build_dataset(
    traces: list[MotionTrace],
    spec: LabelSpec,
    norm: NormStats | None = None,
    train_per_condition: int = 7,
    factor: int = POLICY_FACTOR,
    task: str = "",
) -> Dataset:
    if not traces:
        raise DatasetError("cannot build a dataset from zero traces")
    n_joints = traces[0].n_joints
    raw = []
    for trace, split in zip(traces, assign_splits(traces, train_per_condition)):
        label = trace.meta.label if trace.meta.label is not None else attach_label(trace, spec, trace.meta.ratio)
        for phase, sub in enumerate(downsample_rearrange(trace, factor)):
            inputs, targets = sequence_arrays(sub, label)
            raw.append(LabeledSequence(inputs, targets, trace.meta.trace_id, float(trace.meta.ratio), phase, float(label), trace.meta.variant, split))

    if norm is None:
        train = [sequence for sequence in raw if sequence.split == "train"]
        if not train:
            raise DatasetError("training split is empty")
        norm = NormStats.fit(
            np.vstack([sequence.inputs for sequence in train]), np.vstack([sequence.targets for sequence in train]), n_joints
        )
    for sequence in raw:
        sequence.inputs = norm.normalize_inputs(sequence.inputs)
        sequence.targets = norm.normalize_targets(sequence.targets)
    dataset = Dataset(task or traces[0].meta.task, n_joints, norm, raw)
    LOG.info("Built dataset from %d traces: %s", len(traces), dataset.counts())
    return dataset


def naive_augment(
    demo_traces,
    ratios,
    reference: list[MotionTrace],
    spec: LabelSpec,
    train_per_condition: int = 7,
    factor: int = POLICY_FACTOR,
) -> Dataset:
    """Time-rescaled copies of the demos, one per reference playback, labelled like that playback."""
    demos = {trace.meta.variant: trace for trace in demo_traces}
    allowed = {float(ratio) for ratio in ratios}
    copies = []
    for ref in reference:
        demo = demos.get(ref.meta.variant)
        if demo is None:
            raise DatasetError(f"no demonstration for variant {ref.meta.variant!r}")
        if demo.meta.ratio != 1.0:
            raise DatasetError("naive augmentation expects demonstrations taught at ratio 1")
        if float(ref.meta.ratio) not in allowed:
            raise DatasetError(f"reference ratio {ref.meta.ratio} is not among {sorted(allowed)}")
        label = ref.meta.label if ref.meta.label is not None else attach_label(ref, spec, ref.meta.ratio)
        naive = rescale_trace(demo, ref.meta.ratio)
        copies.append(naive.with_meta(ratio=float(ref.meta.ratio), label=label, trace_id=f"naive_{ref.meta.trace_id}", outcome="success"))
    return build_dataset(copies, spec, None, train_per_condition, factor, task=demo_traces[0].meta.task if demo_traces else "")


def add_input_noise(dataset: Dataset, scale: float = 0.01, seed: int = 0, splits=("train",)) -> Dataset:
    """Gaussian noise of `scale` standard deviations on the normalised inputs; targets untouched."""
    rng = np.random.default_rng(seed)
    sequences = []
    for sequence in dataset.sequences:
        if scale > 0 and sequence.split in splits:
            noisy = sequence.inputs + rng.normal(0.0, scale, sequence.inputs.shape)
            sequences.append(replace(sequence, inputs=noisy))
        else:
            sequences.append(replace(sequence, inputs=sequence.inputs.copy()))
    return replace(dataset, sequences=sequences)
