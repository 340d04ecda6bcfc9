"""
Run ledger for CGKS: runs, error norms and reconstruction benchmarks
"""
from datetime import datetime
from typing import Iterable, Optional

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

from . import settings

Base = declarative_base()


class RunRecord(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String(255), index=True)
    kind = Column(String(50), default="run")  # run, accuracy, bench

    # Setup
    mesh = Column(String(255))
    cells = Column(Integer)
    reconstruction = Column(String(50))
    weno = Column(Integer, default=1)
    df = Column(Integer, default=1)
    config_text = Column(Text)

    # Outcome
    steps = Column(Integer, default=0)
    end_time = Column(Float)
    wall_time = Column(Float)
    status = Column(String(50), default="completed")  # completed, failed

    created_at = Column(DateTime, default=datetime.utcnow)

    norms = relationship("NormRecord", back_populates="run", cascade="all, delete-orphan")
    benches = relationship("BenchRecord", back_populates="run", cascade="all, delete-orphan")


class NormRecord(Base):
    __tablename__ = "norms"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    level = Column(Integer, default=0)
    cells = Column(Integer)
    variable = Column(String(20), default="rho")
    l1 = Column(Float)
    l2 = Column(Float)
    linf = Column(Float)
    order_l1 = Column(Float)
    order_l2 = Column(Float)
    order_linf = Column(Float)

    run = relationship("RunRecord", back_populates="norms")


class BenchRecord(Base):
    __tablename__ = "benches"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    path = Column(String(50))
    reals_per_cell = Column(Float)
    matrices = Column(Integer)
    reconstruction_time = Column(Float)
    step_time = Column(Float)

    run = relationship("RunRecord", back_populates="benches")


def make_engine(url: Optional[str] = None):
    url = url or settings.DATABASE_URL
    return create_engine(url, connect_args={"check_same_thread": False} if "sqlite" in url else {})


def init_db(url: Optional[str] = None) -> sessionmaker:
    """Create all tables and return a session factory bound to them"""
    engine = make_engine(url)
    Base.metadata.create_all(bind=engine)
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


def record_run(session, run: RunRecord, norms: Iterable[NormRecord] = (),
               benches: Iterable[BenchRecord] = ()) -> RunRecord:
    run.norms.extend(norms)
    run.benches.extend(benches)
    session.add(run)
    session.commit()
    session.refresh(run)
    return run
