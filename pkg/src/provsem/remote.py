"""Minimal client for OpenAI-compatible chat-completions and embeddings endpoints."""

from __future__ import annotations

import logging
import os
import time

import requests

from .errors import CredentialError, ProviderError

logger = logging.getLogger(__name__)

API_KEY_ENV = "PROVSEM_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class TransportError(ProviderError):
    pass


def api_key_from_env() -> str:
    key = os.environ.get(API_KEY_ENV)
    if not key:
        raise CredentialError(f"remote provider requires the {API_KEY_ENV} environment variable")
    return key


class OpenAIClient:
    """POSTs JSON with bounded retries and exponential backoff.

    Retries on connection errors, timeouts, 429 and 5xx. Other HTTP errors fail at once.
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else api_key_from_env()
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}/{path.lstrip('/')}"
        headers = {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last = exc
                logger.warning("POST %s failed (attempt %d): %s", url, attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = TransportError(f"HTTP {resp.status_code} from {url}")
                logger.warning("POST %s returned %d (attempt %d)", url, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError:
                raise ProviderError(f"non-JSON response from {url}") from None
        raise TransportError(f"giving up on {url} after {self.max_retries + 1} attempts: {last}")

    def chat(self, model: str, messages: list[dict], temperature: float = 0.0, max_tokens: int | None = None) -> str:
        payload = {"model": model, "messages": messages, "temperature": temperature}
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        body = self.post("chat/completions", payload)
        try:
            return body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise ProviderError("chat response lacks choices[0].message.content") from None

    def embeddings(self, model: str, texts: list[str], dimensions: int | None = None) -> list[list[float]]:
        payload = {"model": model, "input": texts}
        if dimensions is not None:
            payload["dimensions"] = dimensions
        body = self.post("embeddings", payload)
        try:
            data = sorted(body["data"], key=lambda d: d["index"])
            return [d["embedding"] for d in data]
        except (KeyError, TypeError):
            raise ProviderError("embeddings response lacks data[].embedding") from None
