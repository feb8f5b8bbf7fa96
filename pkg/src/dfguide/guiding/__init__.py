from dfguide.guiding.records import PathVertexRecords
from dfguide.guiding.system import Condition, GuideConfig, GuidingSystem, MixedSample, mixed_sample
from dfguide.guiding.trainer import FrameStats, GuidingTrainer, TrainSchedule

__all__ = [
    "Condition",
    "FrameStats",
    "GuideConfig",
    "GuidingSystem",
    "GuidingTrainer",
    "MixedSample",
    "PathVertexRecords",
    "TrainSchedule",
    "mixed_sample",
]
