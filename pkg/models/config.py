import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.errors import ConfigurationError

PROTOTYPE_DIM = 64


class BackboneConfig(BaseModel):
    """Patch-embedding encoder with a frozen body and trainable adapters"""
    model_config = ConfigDict(frozen=True)

    patch: int = Field(16, ge=1, description="Patch size (pixels per feature cell)")
    embed_dim: int = Field(64, ge=2, description="Feature channels C")
    depth: int = Field(2, ge=0, description="Number of mixer blocks")
    adapter_dim: int = Field(16, ge=1, description="Adapter bottleneck width")
    freeze_body: bool = Field(True, description="Freeze patch-embed and mixer weights")

    @model_validator(mode="after")
    def _adapter_narrower(self) -> "BackboneConfig":
        if self.adapter_dim >= self.embed_dim:
            raise ValueError(f"adapter_dim ({self.adapter_dim}) must be < embed_dim ({self.embed_dim})")
        return self


class MfeaConfig(BaseModel):
    """Frequency extraction/alignment constants"""
    model_config = ConfigDict(frozen=True)

    channels: int = Field(..., ge=2, description="Input feature channels C")
    reduced_channels: Optional[int] = Field(None, ge=2, description="C_f, defaults to C/2")
    alpha: float = Field(0.5, description="Initial boundary-attention weight")
    beta: float = Field(0.5, description="Initial structure-attention weight")
    fusion: float = Field(0.3, description="Residual modulation weight lambda (fixed)")

    @property
    def cf(self) -> int:
        return self.reduced_channels or max(self.channels // 2, 2)


class FgbrConfig(BaseModel):
    """Boundary prototype distillation and cross-attention"""
    model_config = ConfigDict(frozen=True)

    channels: int = Field(..., ge=1, description="Feature channels C")
    high_freq_channels: int = Field(..., ge=1, description="C_f of each high-frequency map")
    prototype_dim: int = Field(PROTOTYPE_DIM, description="Prototype width")
    tokens: int = Field(1, ge=1, description="Prototype tokens T")
    hidden: int = Field(256, ge=1, description="Distiller hidden width")
    heads: int = Field(8, ge=1)
    head_dim: Optional[int] = Field(None, ge=1, description="Per-head dim d, defaults to C/heads")
    omega: float = Field(0.2, description="Initial residual weight")

    @model_validator(mode="after")
    def _heads_divide(self) -> "FgbrConfig":
        if self.head_dim is None and self.channels % self.heads:
            raise ValueError(f"embed_dim ({self.channels}) must be divisible by heads ({self.heads})")
        return self

    @property
    def d(self) -> int:
        return self.head_dim or self.channels // self.heads


class MbgdConfig(BaseModel):
    """Transposed-conv decoder with boundary-first dual heads"""
    model_config = ConfigDict(frozen=True)

    channels: int = Field(..., ge=1)
    num_up_blocks: int = Field(4, ge=1)
    min_channels: int = Field(8, ge=1, description="Channel floor of the halving schedule")
    boundary_channels: int = Field(16, ge=1, description="C_b of the boundary-feature conv")
    dual_head: bool = Field(True, description="False gives the plain single-head decoder")

    def schedule(self) -> Tuple[int, ...]:
        widths = [self.channels]
        for _ in range(self.num_up_blocks):
            widths.append(max(widths[-1] // 2, self.min_channels))
        return tuple(widths)


class LossWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    boundary: float = Field(0.3, ge=0.0, description="lambda_b")
    boundary_radius: int = Field(1, ge=1, description="Structuring-element radius")


class AdamConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lr: float = Field(1e-4, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    decay: float = Field(0.98, gt=0.0, le=1.0, description="Per-epoch exponential lr decay")


class GeneratorConfig(BaseModel):
    """Synthetic ultrasound-like sample recipe"""
    model_config = ConfigDict(frozen=True)

    min_ellipses: int = 1
    max_ellipses: int = 3
    blur_sigma: Tuple[float, float] = (1.0, 3.0)
    speckle_std: Tuple[float, float] = (0.1, 0.3)
    contrast_gap: Tuple[float, float] = (0.15, 0.4)
    min_fraction: float = 0.02
    max_fraction: float = 0.6

    @classmethod
    def preset(cls, name: str) -> "GeneratorConfig":
        if name == "default":
            return cls()
        if name == "shifted":
            return cls(blur_sigma=(2.0, 4.0), speckle_std=(0.3, 0.5), contrast_gap=(0.08, 0.2))
        raise ConfigurationError(f"unknown generator preset {name!r}")


class RunConfig(BaseModel):
    """Flat run configuration; file keys map 1:1 onto fields.

    Validation never reads the environment. ``from_file`` applies FREQSEG_* values.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    image_size: int = Field(64, ge=1)
    patch: int = Field(16, ge=1)
    embed_dim: int = Field(64, ge=2)
    depth: int = Field(2, ge=0)
    adapter_dim: int = Field(16, ge=1)
    freeze_body: bool = True
    num_up_blocks: int = Field(4, ge=1)
    heads: int = Field(8, ge=1)
    head_dim: Optional[int] = None
    prototype_tokens: int = Field(1, ge=1)

    use_mfea: bool = True
    use_fgbr: bool = True
    use_mbgd: bool = True

    fusion_lambda: float = 0.3
    alpha0: float = 0.5
    beta0: float = 0.5
    omega0: float = 0.2
    lambda_b: float = Field(0.3, ge=0.0)
    boundary_radius: int = Field(1, ge=1)

    lr: float = Field(1e-4, gt=0.0)
    decay: float = Field(0.98, gt=0.0, le=1.0)
    batch_size: int = Field(16, ge=1)
    epochs: int = Field(300, ge=1)
    seed: int = 0

    split_train: int = Field(8, ge=1)
    split_val: int = Field(1, ge=0)
    split_test: int = Field(1, ge=0)
    generator: str = "default"
    hd_spacing: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def _check_dependencies(self) -> "RunConfig":
        if self.use_fgbr and not self.use_mfea:
            raise ValueError("use_fgbr requires use_mfea (FGBR consumes the MFEA high-frequency maps)")
        if self.adapter_dim >= self.embed_dim:
            raise ValueError(f"adapter_dim ({self.adapter_dim}) must be < embed_dim ({self.embed_dim})")
        if self.image_size % self.patch:
            raise ValueError(f"image_size ({self.image_size}) must be divisible by patch ({self.patch})")
        grid = self.image_size // self.patch
        if self.use_mfea and (grid % 2 or grid < 4):
            raise ValueError(
                f"feature grid {grid} (image_size/patch) must be even and >= 4 for the two-scale wavelet path"
            )
        if self.patch != 2 ** self.num_up_blocks:
            raise ValueError(
                f"patch ({self.patch}) must equal 2**num_up_blocks ({2 ** self.num_up_blocks}) "
                "so predictions return at input resolution"
            )
        if self.use_fgbr and self.head_dim is None and self.embed_dim % self.heads:
            raise ValueError(f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})")
        GeneratorConfig.preset(self.generator)
        return self

    @property
    def grid(self) -> int:
        return self.image_size // self.patch

    @property
    def backbone(self) -> BackboneConfig:
        return BackboneConfig(
            patch=self.patch,
            embed_dim=self.embed_dim,
            depth=self.depth,
            adapter_dim=self.adapter_dim,
            freeze_body=self.freeze_body
        )

    @property
    def mfea(self) -> MfeaConfig:
        return MfeaConfig(channels=self.embed_dim, alpha=self.alpha0, beta=self.beta0, fusion=self.fusion_lambda)

    @property
    def fgbr(self) -> FgbrConfig:
        return FgbrConfig(
            channels=self.embed_dim,
            high_freq_channels=self.mfea.cf,
            tokens=self.prototype_tokens,
            heads=self.heads,
            head_dim=self.head_dim,
            omega=self.omega0
        )

    @property
    def mbgd(self) -> MbgdConfig:
        return MbgdConfig(channels=self.embed_dim, num_up_blocks=self.num_up_blocks, dual_head=self.use_mbgd)

    @property
    def loss(self) -> LossWeights:
        return LossWeights(boundary=self.lambda_b, boundary_radius=self.boundary_radius)

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(lr=self.lr, decay=self.decay)

    @property
    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig.preset(self.generator)

    def toggles(self) -> Dict[str, bool]:
        return {"mfea": self.use_mfea, "fgbr": self.use_fgbr, "mbgd": self.use_mbgd}

    def constants(self) -> Dict[str, Any]:
        """Model constants as configured"""
        return {
            "alpha": self.alpha0,
            "beta": self.beta0,
            "lambda": self.fusion_lambda,
            "omega": self.omega0,
            "lambda_b": self.lambda_b,
            "prototype_dim": PROTOTYPE_DIM,
            "heads": self.heads,
            "head_dim": self.head_dim or self.embed_dim // self.heads,
            "up_blocks": self.num_up_blocks
        }

    def config_hash(self) -> str:
        """SHA256 of the canonical JSON dump"""
        payload = json.dumps(self.model_dump(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with per-key changes"""
        data = self.model_dump()
        data.update(overrides)
        return type(self).model_validate(data)

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "RunConfig":
        presets = {
            "desk": {},
            "fidelity": {"image_size": 512, "embed_dim": 1024, "adapter_dim": 64, "head_dim": 128},
        }
        if name not in presets:
            raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(presets)}")
        return cls(**{**presets[name], **overrides})

    @classmethod
    def from_file(cls, path: Optional[Path] = None, **overrides: Any) -> "RunConfig":
        """Load ``key=value`` text, apply overrides, then environment"""
        values: Dict[str, Any] = {}
        if path is not None:
            if not Path(path).is_file():
                raise FileNotFoundError(f"config file not found: {path}")
            values.update({k: v for k, v in dotenv_values(path).items() if v is not None})
        values.update(overrides)
        settings = RunSettings(**values)
        return RunConfig.model_validate(settings.model_dump())

    def to_text(self) -> str:
        lines = []
        for key, value in self.model_dump().items():
            if value is None:
                continue
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


class RunSettings(BaseSettings, RunConfig):
    """RunConfig fields read from FREQSEG_* variables at the entry points"""
    model_config = SettingsConfigDict(env_prefix="FREQSEG_", extra="forbid", frozen=True)

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        # environment wins over file values and per-key overrides
        return env_settings, init_settings
