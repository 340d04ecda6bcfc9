"""
Process-level settings for CGKS, read from the environment / .env
"""
import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_LEVEL = os.getenv("CGKS_LOG_LEVEL", "INFO").upper()
WORKERS = int(os.getenv("CGKS_WORKERS", "1"))
DATABASE_URL = os.getenv("CGKS_DATABASE_URL", "sqlite:///./cgks_runs.db")
OUTPUT_DIR = os.getenv("CGKS_OUTPUT_DIR", "./out")

# Gas defaults
GAMMA = 1.4
CFL = 0.5

# Artificial collision time: tau_num = tau + C1*dt + C2*|pl-pr|/(pl+pr)*dt
COLLISION_C1 = 0.05
COLLISION_C2 = 1.0

# Multi-resolution WENO
WENO_GAMMA = (0.5, 0.5)  # (gamma_1, gamma_2)
WENO_EPSILON = 1e-5
WENO_BETA_FLOOR = 1e-40

# Geometry tolerances
PERIODIC_TOLERANCE = 1e-9
