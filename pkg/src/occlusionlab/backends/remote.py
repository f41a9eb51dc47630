"""HTTP client adapter speaking to a backend service (see
occlusionlab.service). Makes any pipeline stage a thin client of a
long-running inpainting/feature server."""

from __future__ import annotations

import numpy as np

try:
    import httpx
except ImportError:  # pragma: no cover
    httpx = None

from ..errors import BackendError, BackendUnavailableError, CapabilityError
from ..wire import decode_image, decode_tensor, encode_image, encode_mask
from .base import (
    CapabilityReport,
    DiffusionFeatureMap,
    FeatureRequest,
    GenerativeBackend,
    InpaintRequest,
)


class RemoteDiffusionBackend(GenerativeBackend):
    """Client for the HTTP backend service.

    ``client`` may be any httpx-compatible client (tests inject one
    bound to an ASGI transport); by default a real connection pool to
    ``base_url`` is opened.
    """

    name = "remote"

    def __init__(self, base_url: str, client=None, timeout: float = 60.0):
        if httpx is None:
            raise BackendUnavailableError("httpx is required for the remote backend")
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(base_url=self.base_url, timeout=timeout)
        self._capabilities: CapabilityReport | None = None

    def _request(self, method: str, path: str, **kwargs):
        try:
            response = self._client.request(method, path, **kwargs)
        except httpx.TransportError as exc:
            raise BackendUnavailableError(
                f"backend service at {self.base_url} unreachable: {exc}"
            ) from exc
        if response.status_code == 422:
            raise CapabilityError(_detail(response))
        if response.status_code >= 400:
            raise BackendError(f"backend service error {response.status_code}: {_detail(response)}")
        return response.json()

    def inpaint(self, request: InpaintRequest) -> np.ndarray:
        payload = {
            "image": encode_image(request.image),
            "mask": encode_mask(request.mask),
            "prompt": request.prompt,
            "seed": request.seed,
            "steps": request.steps,
        }
        body = self._request("POST", "/v1/inpaint", json=payload)
        return decode_image(body["image"])

    def extract_features(self, request: FeatureRequest) -> DiffusionFeatureMap:
        payload = {
            "image": encode_image(request.image),
            "prompt": request.prompt,
            "timestep": request.timestep,
            "tap": request.tap,
            "seed": request.seed,
        }
        body = self._request("POST", "/v1/features", json=payload)
        return DiffusionFeatureMap(values=decode_tensor(body))

    def capabilities(self) -> CapabilityReport:
        if self._capabilities is None:
            body = self._request("GET", "/v1/capabilities")
            self._capabilities = CapabilityReport.from_dict(body)
        return self._capabilities

    @property
    def version(self) -> str:  # type: ignore[override]
        return self.capabilities().backend_version

    def parameter_checksum(self) -> str:
        body = self._request("GET", "/v1/checksum")
        return body["parameter_checksum"]


def _detail(response) -> str:
    try:
        return str(response.json().get("detail", response.text))
    except Exception:
        return response.text
