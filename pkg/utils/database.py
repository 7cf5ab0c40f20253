import os
from pathlib import Path

from sqlalchemy import Boolean, Column, Float, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

Base = declarative_base()


class PlaybackAttempt(Base):
    __tablename__ = 'playback_attempts'

    id = Column(Integer, primary_key=True)
    task = Column(String(16))
    mode = Column(String(16))
    variant = Column(String(32))
    ratio = Column(Float)
    attempt = Column(Integer)
    seed = Column(Integer)
    success = Column(Boolean)
    failure_reason = Column(String(32))
    label = Column(Float, nullable=True)
    trace_file = Column(String(255))


class EvalTrial(Base):
    __tablename__ = 'eval_trials'

    id = Column(Integer, primary_key=True)
    task = Column(String(16))
    mode = Column(String(16))
    variant = Column(String(32))
    label = Column(Float)
    trial = Column(Integer)
    seed = Column(Integer)
    success = Column(Boolean)
    failure_reason = Column(String(32))
    measurement = Column(Float, nullable=True)
    interpolated = Column(Boolean)


# Row order of the rebuilt file; ids are positions in this order.
ORDER = {
    PlaybackAttempt: ('task', 'mode', 'variant', 'ratio', 'attempt'),
    EvalTrial: ('task', 'mode', 'variant', 'label', 'trial'),
}


class ExperimentLedger:
    """SQLite record of every playback attempt and evaluation trial of a run.

    Every write rebuilds the file from scratch with sorted rows and explicit ids,
    so equal contents give equal bytes whatever order the modes were written in.
    """

    def __init__(self, db_path='ledger.sqlite'):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._open()

    def _open(self):
        self.engine = create_engine(f'sqlite:///{self.db_path}')
        Base.metadata.create_all(self.engine)
        Session = sessionmaker(bind=self.engine)
        self.session = Session()

    def _rows(self, model):
        columns = [column.name for column in model.__table__.columns if column.name != 'id']
        return [{name: getattr(record, name) for name in columns} for record in self.session.query(model).all()]

    def _rewrite(self, model, task, mode, rows):
        """Replace the (task, mode) rows of `model` and write every table to a fresh file."""
        tables = {}
        for table, keys in ORDER.items():
            kept = self._rows(table)
            if table is model:
                kept = [row for row in kept if (row['task'], row['mode']) != (task, mode)] + list(rows)
            tables[table] = sorted(kept, key=lambda row: tuple(row[key] for key in keys))
        self.close()

        staging = self.db_path.with_name(self.db_path.name + '.tmp')
        staging.unlink(missing_ok=True)
        engine = create_engine(f'sqlite:///{staging}')
        Base.metadata.create_all(engine)
        with engine.begin() as connection:
            for table, table_rows in tables.items():
                if table_rows:
                    connection.execute(
                        table.__table__.insert(),
                        [{'id': index, **row} for index, row in enumerate(table_rows, start=1)],
                    )
        engine.dispose()
        os.replace(staging, self.db_path)
        self._open()

    def clear(self, model, task, mode):
        self._rewrite(model, task, mode, [])

    def save_playbacks(self, task, mode, rows):
        """Replace the (task, mode) playback rows; `rows` are manifest dicts."""
        records = [
            dict(
                task=task,
                mode=mode,
                variant=row['variant'],
                ratio=float(row['ratio']),
                attempt=int(row['attempt']),
                seed=int(row['seed']),
                success=bool(row['success']),
                failure_reason=row.get('failure_reason', ''),
                label=_nullable(row.get('label')),
                trace_file=row['trace_file'],
            )
            for row in rows
        ]
        self._rewrite(PlaybackAttempt, task, mode, records)
        return len(records)

    def save_eval_trials(self, task, mode, report):
        records = [
            dict(
                task=task,
                mode=mode,
                variant=record.variant,
                label=float(record.label),
                trial=int(record.trial),
                seed=int(record.seed),
                success=bool(record.success),
                failure_reason=record.reason,
                measurement=_nullable(record.measurement),
                interpolated=bool(record.interpolated),
            )
            for record in report.records
        ]
        self._rewrite(EvalTrial, task, mode, records)
        return len(records)

    def get_playbacks(self, task, mode=None):
        query = self.session.query(PlaybackAttempt).filter(PlaybackAttempt.task == task)
        if mode is not None:
            query = query.filter(PlaybackAttempt.mode == mode)
        return query.order_by(PlaybackAttempt.id).all()

    def get_eval_trials(self, task, mode=None):
        query = self.session.query(EvalTrial).filter(EvalTrial.task == task)
        if mode is not None:
            query = query.filter(EvalTrial.mode == mode)
        return query.order_by(EvalTrial.id).all()

    def success_rates(self, task):
        """Evaluation success rate per mode."""
        rates = {}
        for trial in self.get_eval_trials(task):
            total, wins = rates.get(trial.mode, (0, 0))
            rates[trial.mode] = (total + 1, wins + int(trial.success))
        return {mode: wins / total for mode, (total, wins) in rates.items()}

    def close(self):
        self.session.close()
        self.engine.dispose()


def _nullable(value):
    if value is None:
        return None
    value = float(value)
    return None if value != value else value
