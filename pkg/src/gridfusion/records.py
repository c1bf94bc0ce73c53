"""Stage and run records written to a run's summary.json and timings.json"""
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone


def _now():
    return datetime.now(timezone.utc)


@dataclass
class StageRecord:
    """One pipeline stage: what ran, how long it took, what it produced"""

    STATUS_PENDING = 'pending'
    STATUS_RUNNING = 'running'
    STATUS_COMPLETED = 'completed'
    STATUS_FAILED = 'failed'

    name: str
    status: str = STATUS_PENDING
    created_at: datetime = field(default_factory=_now)
    started_at: datetime = None
    completed_at: datetime = None
    duration_ms: float = None
    shape: tuple = None
    checksum: str = None
    path: str = None
    error_message: str = None
    _start_time: float = field(default=None, repr=False)

    def __str__(self):
        return f"{self.name} - {self.status}"

    def start(self):
        self.status = self.STATUS_RUNNING
        self.started_at = _now()
        self._start_time = time.perf_counter()

    def finish(self, grid=None, path=None):
        self._stop(self.STATUS_COMPLETED)
        if grid is not None:
            self.shape = tuple(grid.shape)
            self.checksum = grid.checksum()
        if path is not None:
            self.path = str(path)

    def fail(self, error):
        self._stop(self.STATUS_FAILED)
        self.error_message = str(error)

    def _stop(self, status):
        self.status = status
        self.completed_at = _now()
        if self._start_time is not None:
            self.duration_ms = (time.perf_counter() - self._start_time) * 1000

    def get_duration(self):
        """Calculate stage duration in seconds"""
        if self.duration_ms is not None:
            return self.duration_ms / 1000
        if self._start_time is not None:
            # Stage is still running
            return time.perf_counter() - self._start_time
        return None

    def is_running(self):
        return self.status == self.STATUS_RUNNING

    def to_dict(self, timings=False):
        """JSON form; timestamps and durations only when ``timings`` is set."""
        data = {
            'name': self.name,
            'status': self.status,
            'shape': list(self.shape) if self.shape is not None else None,
            'checksum': self.checksum,
            'path': self.path,
            'error_message': self.error_message,
        }
        if timings:
            data.update({
                'created_at': self.created_at.isoformat(),
                'started_at': self.started_at.isoformat() if self.started_at else None,
                'completed_at': self.completed_at.isoformat() if self.completed_at else None,
                'duration_ms': round(self.duration_ms, 2) if self.duration_ms is not None else None,
            })
        return data


@dataclass
class RunRecord:
    """All stages of one pipeline run, in execution order"""

    preset: str = None
    seed: int = 0
    stages: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, name):
        stage = StageRecord(name)
        self.stages.append(stage)
        return stage

    def stage(self, name):
        for stage in self.stages:
            if stage.name == name:
                return stage
        raise KeyError(name)

    @property
    def failed(self):
        return [s for s in self.stages if s.status == StageRecord.STATUS_FAILED]

    def get_duration(self):
        return sum(s.get_duration() or 0.0 for s in self.stages)

    def to_dict(self, timings=False):
        completed = sum(1 for s in self.stages if s.status == StageRecord.STATUS_COMPLETED)
        data = {
            'preset': self.preset,
            'seed': self.seed,
            'total_stages': len(self.stages),
            'completed_stages': completed,
            'failed_stages': len(self.failed),
        }
        if timings:
            data['total_duration_ms'] = round(self.get_duration() * 1000, 2)
        data['stages'] = [s.to_dict(timings) for s in self.stages]
        data.update(self.extra)
        return data
