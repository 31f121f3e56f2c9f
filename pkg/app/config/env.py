import os

try:
    # Load variables from a .env file when available (no hard dependency)
    from dotenv import load_dotenv

    load_dotenv()
except ImportError:
    pass


def _int_var(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        return int(raw)
    except ValueError:
        raise EnvironmentError(f"Environment variable {name} must be an integer, got '{raw}'")


# --- Outputs ---
ANYTIME_OUT_DIR = os.getenv("ANYTIME_OUT_DIR", "out")

# --- Runs (CLI flags take precedence) ---
ANYTIME_SEED = _int_var("ANYTIME_SEED", 0)
ANYTIME_THREADS = _int_var("ANYTIME_THREADS", 1)

# --- Logging ---
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
