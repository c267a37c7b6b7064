import logging
from functools import lru_cache
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
import logfire


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix ``EDGECHAIN_``)."""

    # Service Configuration
    SERVICE_NAME: str = "edgechain"
    DEBUG: bool = False

    # Identity
    SIGNATURE_SCHEME: str = "ed25519"
    CERT_VALIDITY_MS: int = 365 * 24 * 3600 * 1000

    # Network Simulation
    LINK_BASE_LATENCY_MS: float = 5.0
    LINK_JITTER_MS: float = 2.0
    LINK_LOSS_RATE: float = 0.0

    # Raft
    ELECTION_TIMEOUT_MIN_MS: float = 150.0
    ELECTION_TIMEOUT_MAX_MS: float = 300.0
    HEARTBEAT_MS: float = 50.0
    DELIVERY_RESEND_WINDOW: int = 8

    # Block Cutting
    BLOCK_MAX_MESSAGE_COUNT: int = 10
    BLOCK_MAX_BYTES: int = 512 * 1024
    BLOCK_BATCH_TIMEOUT_MS: float = 250.0

    # Edge-server compute cost model
    ENDORSE_BASE_MS: float = 400.0
    ENDORSE_PER_KIB_MS: float = 1.7
    VALIDATE_BASE_MS: float = 2.0
    VALIDATE_PER_KIB_MS: float = 0.25

    # Client timeouts
    ENDORSEMENT_TIMEOUT_MS: float = 10_000.0
    SUBMIT_ACK_TIMEOUT_MS: float = 500.0
    COMMIT_TIMEOUT_MS: float = 10_000.0
    NO_LEADER_BACKOFF_MS: float = 100.0
    STANDBY_TAKEOVER_MS: float = 2_000.0
    CLIENT_MAX_RETRIES: int = 5

    # Routing
    INCIDENT_PENALTY_FACTOR: float = 10.0

    # Output
    OUT_DIR: str = "./out"

    # Logging
    LOGFIRE_TOKEN: Optional[str] = None
    LOG: str = "WARNING"

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="EDGECHAIN_", case_sensitive=True, extra="ignore"
    )


@lru_cache
def get_settings() -> Settings:
    return Settings()


def configure_logging(level: Optional[str] = None) -> None:
    """Configure stdlib logging and logfire from settings."""
    current = get_settings()
    logging.basicConfig(
        level=(level or current.LOG).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logfire.configure(
        token=current.LOGFIRE_TOKEN,
        service_name=current.SERVICE_NAME,
        send_to_logfire="if-token-present",
        console=False,
    )


settings = get_settings()
