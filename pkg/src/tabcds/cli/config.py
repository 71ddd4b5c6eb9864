"""
Experiment configuration files.

Configs are INI files read through ``QSettings``. Every entry is declared in a
schema table with its default, type and optional converter; unknown entries
and bad values raise ``ConfigError`` naming the field before any work starts.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from PySide6.QtCore import QSettings

from tabcds.analysis.bounds import BoundConstants
from tabcds.analysis.divergences import KL_SMOOTHING
from tabcds.data.behavior import BehaviorConfig
from tabcds.data.transitions import DatasetQuality
from tabcds.envs.corridor import CORRIDOR_TASKS, CorridorTriTaskSpec, build_corridor_tritask
from tabcds.envs.multigoal_grid import MultiGoalGridSpec, build_multigoal_grid
from tabcds.envs.skill_tags import SkillTag, corridor_skill_tags, grid_skill_tags
from tabcds.errors import ConfigError, EnvironmentSpecError, PreconditionError
from tabcds.learning.config import LearnerConfig, LearnerKind, MuMode, WeightRule
from tabcds.mdp.multitask_mdp import MultiTaskMdp
from tabcds.sharing.strategies import TEMPERATURE_PRESETS, SharingStrategy, parse_strategy

ENVIRONMENT_KINDS = ("corridor", "grid")
SPLIT_KINDS = ("undirected", "directed")
KL_OCCUPANCIES = ("dataset", "policy")

_TASK_SECTION = re.compile(r"^task(\d+)$")
_SEPARATORS = re.compile(r"[\s,]+")


def _text(value: Any) -> str:
    # QSettings hands back comma-separated INI values as lists.
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value).strip()


def _words(value: Any) -> Tuple[str, ...]:
    return tuple(w for w in _SEPARATORS.split(_text(value)) if w)


def _bool(value: Any) -> bool:
    text = _text(value).lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _float(value: Any) -> float:
    text = _text(value).lower()
    return math.inf if text in ("inf", "infinity") else float(text)


def _cell(text: str) -> Tuple[int, int]:
    x, sep, y = text.partition(':')
    if not sep:
        raise ValueError(f"cells are written x:y, got {text!r}")
    return int(x), int(y)


def _cells(value: Any) -> Tuple[Tuple[int, int], ...]:
    return tuple(_cell(w) for w in _words(value))


def _ints(value: Any) -> Tuple[int, ...]:
    return tuple(int(w) for w in _words(value))


def _choice(options: Tuple[str, ...]) -> Callable[[Any], str]:
    def convert(value: Any) -> str:
        text = _text(value)
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return convert


def _optional_int(value: Any) -> Optional[int]:
    text = _text(value)
    return None if text.lower() in ("", "none", "auto") else int(text)


# Schema keyed by "section/key": default plus the converter applied to stored text.
_SCHEMA: Dict[str, Dict[str, Any]] = {
    'experiment/name': {'default': 'scenario', 'type': _text},
    'experiment/seed': {'default': 0, 'type': int},

    'environment/kind': {'required': True, 'type': _choice(ENVIRONMENT_KINDS)},
    'environment/discount': {'default': None, 'type': _float},
    'environment/slip': {'default': None, 'type': _float},
    'environment/length': {'default': 10, 'type': int},
    'environment/jump_cell': {'default': None, 'type': _optional_int},
    'environment/start_cell': {'default': None, 'type': _optional_int},
    'environment/width': {'default': None, 'type': int},
    'environment/height': {'default': None, 'type': int},
    'environment/goals': {'default': (), 'type': _cells},
    'environment/walls': {'default': (), 'type': _cells},
    'environment/start': {'default': (0, 0), 'type': _cell},
    'environment/goal_radius': {'default': 0, 'type': int},

    'play/trajectories': {'default': 0, 'type': int},
    'play/horizon': {'default': 30, 'type': int},
    'play/noise': {'default': 0.2, 'type': _float},
    'play/split': {'default': 'undirected', 'type': _choice(SPLIT_KINDS)},

    'sharing/strategies': {'default': ('NoShare', 'ShareAll', 'CdsQuantile'), 'type': _words},
    'sharing/k': {'default': 90.0, 'type': _float},
    'sharing/skills': {'default': None, 'type': _words},
    'sharing/preset': {'default': 'default', 'type': _choice(tuple(TEMPERATURE_PRESETS))},
    'sharing/tau_min': {'default': None, 'type': _float},
    'sharing/tau_max': {'default': None, 'type': _float},
    'sharing/decay': {'default': 0.995, 'type': _float},

    'learner/kind': {'default': LearnerKind.CQL.value, 'type': _choice(tuple(k.value for k in LearnerKind))},
    'learner/learning_rate': {'default': 1.0, 'type': _float},
    'learner/iterations': {'default': 100, 'type': int},
    'learner/beta': {'default': 1.0, 'type': _float},
    'learner/alpha': {'default': 0.0, 'type': _float},
    'learner/mu_mode': {'default': MuMode.SOFTMAX.value, 'type': _choice(tuple(m.value for m in MuMode))},
    'learner/mu_temperature': {'default': 1.0, 'type': _float},
    'learner/policy_temperature': {'default': 0.0, 'type': _float},
    'learner/batch_size_per_task': {'default': 128, 'type': int},
    'learner/weight_rule': {'default': WeightRule.RELABELED_ONLY.value,
                            'type': _choice(tuple(w.value for w in WeightRule))},
    'learner/rebuild_every': {'default': 10, 'type': int},
    'learner/kl_max': {'default': 20.0, 'type': _float},
    'learner/q_cap_margin': {'default': 1.0, 'type': _float},
    'learner/newton_steps': {'default': 50, 'type': int},

    'behavior/epsilon': {'default': 0.3, 'type': _float},
    'behavior/learning_rate': {'default': 0.5, 'type': _float},
    'behavior/horizon': {'default': 50, 'type': int},
    'behavior/max_episodes': {'default': 3000, 'type': int},
    'behavior/medium_fraction': {'default': 0.5, 'type': _float},
    'behavior/expert_fraction': {'default': 0.95, 'type': _float},
    'behavior/blend_tolerance': {'default': 0.025, 'type': _float},

    'evaluation/seeds': {'default': (0,), 'type': _ints},
    'evaluation/kl_occupancy': {'default': 'dataset', 'type': _choice(KL_OCCUPANCIES)},
    'evaluation/heatmaps': {'default': False, 'type': _bool},
    'evaluation/alpha': {'default': None, 'type': _float},

    'constants/c_sample': {'default': 1.0, 'type': _float},
    'constants/r_max': {'default': None, 'type': _float},
    'constants/smoothing': {'default': KL_SMOOTHING, 'type': _float},
    'constants/lemma1_c': {'default': None, 'type': _float},
}

_TASK_SCHEMA: Dict[str, Dict[str, Any]] = {
    'quality': {'required': True,
                'type': _choice((DatasetQuality.EXPERT.value, DatasetQuality.MEDIUM.value,
                                 DatasetQuality.MEDIUM_REPLAY.value))},
    'size': {'required': True, 'type': int},
    'seed': {'default': 0, 'type': int},
}


@dataclass(frozen=True)
class TaskRecipe:
    """How one task's dataset is generated."""
    task: int
    quality: DatasetQuality
    size: int
    seed: int = 0


@dataclass(frozen=True)
class PlayRecipe:
    """Task-agnostic play data split across the grid's goals."""
    trajectories: int
    horizon: int = 30
    noise: float = 0.2
    split: str = "undirected"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    environment: Union[CorridorTriTaskSpec, MultiGoalGridSpec]
    tasks: Tuple[TaskRecipe, ...] = ()
    play: Optional[PlayRecipe] = None
    strategies: Tuple[str, ...] = ("NoShare",)
    k: float = 90.0
    skills: Optional[Tuple[str, ...]] = None
    tau_bounds: Tuple[float, float] = TEMPERATURE_PRESETS['default']
    decay: float = 0.995
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    seeds: Tuple[int, ...] = (0,)
    kl_occupancy: str = "dataset"
    heatmaps: bool = False
    bound_alpha: Optional[float] = None
    constants: BoundConstants = field(default_factory=BoundConstants)
    source: Optional[str] = None

    @property
    def environment_kind(self) -> str:
        return "corridor" if isinstance(self.environment, CorridorTriTaskSpec) else "grid"

    @property
    def num_tasks(self) -> int:
        if isinstance(self.environment, CorridorTriTaskSpec):
            return len(CORRIDOR_TASKS)
        return len(self.environment.goals)

    def build_mdp(self) -> MultiTaskMdp:
        if isinstance(self.environment, CorridorTriTaskSpec):
            return build_corridor_tritask(self.environment)
        return build_multigoal_grid(self.environment)

    def skill_tags(self) -> SkillTag:
        if self.skills is not None:
            return SkillTag(self.skills)
        if isinstance(self.environment, CorridorTriTaskSpec):
            return corridor_skill_tags()
        return grid_skill_tags(self.environment)

    def strategy(self, text: str) -> SharingStrategy:
        return parse_strategy(text, self.k, self.skill_tags(), self.tau_bounds, self.decay)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        """Every setting a run used, defaults included."""
        environment = asdict(self.environment)
        if isinstance(self.environment, MultiGoalGridSpec):
            environment['walls'] = sorted(list(cell) for cell in self.environment.walls)
        else:
            environment['jump_cell'] = self.environment.resolved_jump_cell
            environment['start_cell'] = self.environment.resolved_start_cell
        return {
            'name': self.name,
            'seed': self.seed,
            'environment': {'kind': self.environment_kind, **environment},
            'tasks': [{'task': t.task, 'quality': t.quality.value, 'size': t.size, 'seed': t.seed}
                      for t in self.tasks],
            'play': None if self.play is None else asdict(self.play),
            'sharing': {
                'strategies': list(self.strategies),
                'k': self.k,
                'skills': list(self.skill_tags().labels),
                'tau_min': self.tau_bounds[0],
                'tau_max': self.tau_bounds[1] if math.isfinite(self.tau_bounds[1]) else "inf",
                'decay': self.decay,
            },
            'learner': self.learner.to_dict(),
            'behavior': asdict(self.behavior),
            'evaluation': {
                'seeds': list(self.seeds),
                'kl_occupancy': self.kl_occupancy,
                'kl_smoothing': self.constants.smoothing,
                'heatmaps': self.heatmaps,
                'alpha': self.bound_alpha,
            },
            'constants': {
                'c_sample': self.constants.c_sample,
                'r_max': self.constants.r_max,
                'lemma1_c': self.constants.lemma1_c,
            },
        }


def _convert(key: str, schema: Dict[str, Any], stored: Any) -> Any:
    try:
        return schema['type'](stored)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value {_text(stored)!r} ({exc})", field=key) from exc


def _read(settings: QSettings) -> Dict[str, Any]:
    return {key: settings.value(key) for key in settings.allKeys()}


def _values(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Apply ``_SCHEMA`` to every non-task key."""
    out: Dict[str, Any] = {}
    for key, schema in _SCHEMA.items():
        if key in raw:
            out[key] = _convert(key, schema, raw[key])
        elif schema.get('required'):
            raise ConfigError("required entry is missing", field=key)
        else:
            out[key] = schema.get('default')
    return out


def _task_recipes(raw: Dict[str, Any], num_tasks: int) -> Tuple[TaskRecipe, ...]:
    sections: Dict[int, Dict[str, Any]] = {}
    for key, value in raw.items():
        section, _, name = key.partition('/')
        match = _TASK_SECTION.match(section)
        if match:
            sections.setdefault(int(match.group(1)), {})[name] = value
    recipes: List[TaskRecipe] = []
    for index in sorted(sections):
        if index >= num_tasks:
            raise ConfigError(f"task {index} does not exist; the environment has {num_tasks} tasks",
                              field=f"task{index}")
        entries = sections[index]
        for name in entries:
            if name not in _TASK_SCHEMA:
                raise ConfigError("unknown entry", field=f"task{index}/{name}")
        values = {}
        for name, schema in _TASK_SCHEMA.items():
            key = f"task{index}/{name}"
            if name in entries:
                values[name] = _convert(key, schema, entries[name])
            elif schema.get('required'):
                raise ConfigError("required entry is missing", field=key)
            else:
                values[name] = schema['default']
        if values['size'] <= 0:
            raise ConfigError("dataset size must be positive", field=f"task{index}/size")
        recipes.append(TaskRecipe(index, DatasetQuality(values['quality']), values['size'], values['seed']))
    return tuple(recipes)


def _environment(values: Dict[str, Any]) -> Union[CorridorTriTaskSpec, MultiGoalGridSpec]:
    kind = values['environment/kind']
    optional = {name: values[f'environment/{name}'] for name in ('discount', 'slip')
                if values[f'environment/{name}'] is not None}
    if kind == "corridor":
        spec = CorridorTriTaskSpec(length=values['environment/length'], jump_cell=values['environment/jump_cell'],
                                   start_cell=values['environment/start_cell'], **optional)
    else:
        for name in ('width', 'height'):
            if values[f'environment/{name}'] is None:
                raise ConfigError("required for grid environments", field=f"environment/{name}")
        if not values['environment/goals']:
            raise ConfigError("a grid needs at least one goal", field="environment/goals")
        spec = MultiGoalGridSpec(
            width=values['environment/width'],
            height=values['environment/height'],
            goals=values['environment/goals'],
            walls=frozenset(values['environment/walls']),
            start=values['environment/start'],
            goal_radius=values['environment/goal_radius'],
            **optional,
        )
    try:
        spec.validate()
        if kind == "grid":
            build_multigoal_grid(spec)
    except EnvironmentSpecError as exc:
        raise ConfigError(str(exc), field="environment") from exc
    return spec


def _learner(values: Dict[str, Any]) -> LearnerConfig:
    try:
        return LearnerConfig(
            learning_rate=values['learner/learning_rate'],
            iterations=values['learner/iterations'],
            beta=values['learner/beta'],
            alpha=values['learner/alpha'],
            mu_mode=values['learner/mu_mode'],
            mu_temperature=values['learner/mu_temperature'],
            policy_temperature=values['learner/policy_temperature'],
            batch_size_per_task=values['learner/batch_size_per_task'],
            weight_rule=values['learner/weight_rule'],
            rebuild_every=values['learner/rebuild_every'],
            kl_max=values['learner/kl_max'],
            q_cap_margin=values['learner/q_cap_margin'],
            learner=values['learner/kind'],
            newton_steps=values['learner/newton_steps'],
        )
    except PreconditionError as exc:
        raise ConfigError(str(exc), field="learner") from exc


def _behavior(values: Dict[str, Any]) -> BehaviorConfig:
    try:
        return BehaviorConfig(**{name.split('/')[1]: values[name] for name in values if name.startswith('behavior/')})
    except PreconditionError as exc:
        raise ConfigError(str(exc), field="behavior") from exc


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Parse and validate an experiment INI file.

    Raises:
        ConfigError: for a missing file, unknown or missing entries, bad
            values, or task references the environment does not have
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such file: {path}", field="config")
    settings = QSettings(str(path), QSettings.Format.IniFormat)
    if settings.status() != QSettings.Status.NoError:
        raise ConfigError(f"cannot parse {path}", field="config")
    raw = _read(settings)

    for key in raw:
        section = key.partition('/')[0]
        if key not in _SCHEMA and not _TASK_SECTION.match(section):
            raise ConfigError("unknown entry", field=key)
    values = _values(raw)
    environment = _environment(values)
    num_tasks = len(CORRIDOR_TASKS) if isinstance(environment, CorridorTriTaskSpec) else len(environment.goals)

    tasks = _task_recipes(raw, num_tasks)
    play = None
    if values['play/trajectories'] > 0:
        if not isinstance(environment, MultiGoalGridSpec):
            raise ConfigError("play data splits need a grid environment", field="play/trajectories")
        if tasks:
            raise ConfigError("use either task sections or play splits, not both", field="play")
        play = PlayRecipe(values['play/trajectories'], values['play/horizon'], values['play/noise'],
                          values['play/split'])
    elif len(tasks) != num_tasks:
        missing = sorted(set(range(num_tasks)) - {t.task for t in tasks})
        raise ConfigError(f"no dataset recipe for tasks {missing}", field=f"task{missing[0]}")

    skills = values['sharing/skills']
    if skills is not None and len(skills) != num_tasks:
        raise ConfigError(f"{len(skills)} skill labels for {num_tasks} tasks", field="sharing/skills")
    preset = TEMPERATURE_PRESETS[values['sharing/preset']]
    tau_bounds = (
        preset[0] if values['sharing/tau_min'] is None else values['sharing/tau_min'],
        preset[1] if values['sharing/tau_max'] is None else values['sharing/tau_max'],
    )
    if not values['evaluation/seeds']:
        raise ConfigError("need at least one seed", field="evaluation/seeds")

    try:
        constants = BoundConstants(
            c_sample=values['constants/c_sample'],
            r_max=values['constants/r_max'],
            smoothing=values['constants/smoothing'],
            lemma1_c=values['constants/lemma1_c'],
        )
    except PreconditionError as exc:
        raise ConfigError(str(exc), field="constants") from exc

    config = ExperimentConfig(
        name=values['experiment/name'],
        seed=values['experiment/seed'],
        environment=environment,
        tasks=tasks,
        play=play,
        strategies=values['sharing/strategies'],
        k=values['sharing/k'],
        skills=skills,
        tau_bounds=tau_bounds,
        decay=values['sharing/decay'],
        learner=_learner(values),
        behavior=_behavior(values),
        seeds=values['evaluation/seeds'],
        kl_occupancy=values['evaluation/kl_occupancy'],
        heatmaps=values['evaluation/heatmaps'],
        bound_alpha=values['evaluation/alpha'],
        constants=constants,
        source=str(path),
    )
    # Strategy names are checked now so a sweep fails before its first cell.
    for text in config.strategies:
        config.strategy(text)
    return config
