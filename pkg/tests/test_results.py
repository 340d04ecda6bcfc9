import subprocess
import sys
from pathlib import Path

import pytest

from cgks.results import BenchRecord, NormRecord, RunRecord, init_db, record_run


@pytest.fixture
def session():
    session = init_db("sqlite:///:memory:")()
    yield session
    session.close()


def test_record_run_with_norms_and_benches(session):
    run = RunRecord(name="accuracy_hex", kind="accuracy", cells=1000, reconstruction="two_step")
    norms = [NormRecord(level=0, cells=1000, l1=2.1e-2, l2=2.4e-2, linf=3.4e-2),
             NormRecord(level=1, cells=8000, l1=3.1e-3, l2=3.5e-3, linf=4.9e-3, order_l1=2.8)]
    benches = [BenchRecord(path="two_step", reals_per_cell=60.0, matrices=0)]
    saved = record_run(session, run, norms, benches)

    assert saved.id is not None
    assert saved.status == "completed"
    assert saved.created_at is not None
    stored = session.get(RunRecord, saved.id)
    assert [n.level for n in stored.norms] == [0, 1]
    assert stored.norms[1].order_l1 == pytest.approx(2.8)
    assert stored.benches[0].reals_per_cell == 60.0


def test_deleting_a_run_removes_its_rows(session):
    run = record_run(session, RunRecord(name="bench", kind="bench"),
                     benches=[BenchRecord(path="original", reals_per_cell=348.0, matrices=1)])
    session.delete(run)
    session.commit()
    assert session.query(BenchRecord).count() == 0
    assert session.query(RunRecord).count() == 0


def test_models_import_without_sqlalchemy_deprecations():
    done = subprocess.run([sys.executable, "-W", "error::sqlalchemy.exc.SADeprecationWarning", "-c",
                           "import cgks.results"], cwd=Path(__file__).parent.parent, capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
