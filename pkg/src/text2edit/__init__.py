"""Global image editing driven by free-form textual instructions.

Three conditional generator families (bucket mixture, end-to-end fusion,
filter bank) share a common encoder-decoder backbone and a recurrent text
encoder, trained adversarially against a text-aware discriminator on
synthetic global-edit corpora.
"""

from .backbone import Backbone, BackboneConfig, resize_for_model, resize_to
from .data import (
    DatasetManifest,
    EditPair,
    ManifestRecord,
    TextDescription,
    Vocabulary,
    build_vocabulary,
    load_image,
    load_manifest,
    load_pair,
    reverse_pair,
    save_image,
    save_manifest,
    split_text,
    tokenize,
)
from .discriminator import (
    DiscriminatorConfig,
    TextAwareDiscriminator,
    UnigramCooccurrence,
    build_cooccurrence,
    build_instances,
    discriminator_loss,
    sample_random_text,
)
from .errors import (
    DomainError,
    FormatError,
    InvalidInputError,
    NumericError,
    ShapeError,
    ValidationError,
)
from .generators import (
    BucketGenerator,
    EndToEndGenerator,
    FilterBankGenerator,
    blend_branches,
    probe_filter,
)
from .losses import (
    LossWeights,
    StubFeatureExtractor,
    Vgg19FeatureExtractor,
    adversarial_loss,
    content_loss,
    generator_loss,
    load_feature_extractor,
    perceptual_loss,
)
from .metrics import (
    StudyRecord,
    export_rating_tasks,
    filter_effect_report,
    lab_l2,
    lab_to_srgb,
    remap_spread,
    srgb_to_lab,
)
from .models import BundleConfig, ModelBundle, apply_edit, build_bundle, load_model, save_model
from .synth import (
    GlobalTransform,
    InstructionTemplateBank,
    apply_transform,
    assign_buckets,
    generate_corpus,
    load_template_bank,
    luminance,
    make_texture,
)
from .textenc import BiGruEncoder, GraphGruEncoder, GruCell
from .training import (
    IdentityTemplateBank,
    PreparedExample,
    TrainConfig,
    augment_identity,
    make_train_state,
    pretrain_buckets,
    run_training,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "BackboneConfig",
    "BiGruEncoder",
    "BucketGenerator",
    "BundleConfig",
    "DatasetManifest",
    "DiscriminatorConfig",
    "DomainError",
    "EditPair",
    "EndToEndGenerator",
    "FilterBankGenerator",
    "FormatError",
    "GlobalTransform",
    "GraphGruEncoder",
    "GruCell",
    "IdentityTemplateBank",
    "InstructionTemplateBank",
    "InvalidInputError",
    "LossWeights",
    "ManifestRecord",
    "ModelBundle",
    "NumericError",
    "PreparedExample",
    "ShapeError",
    "StubFeatureExtractor",
    "StudyRecord",
    "TextAwareDiscriminator",
    "TextDescription",
    "TrainConfig",
    "UnigramCooccurrence",
    "ValidationError",
    "Vgg19FeatureExtractor",
    "Vocabulary",
    "adversarial_loss",
    "apply_edit",
    "apply_transform",
    "assign_buckets",
    "augment_identity",
    "blend_branches",
    "build_bundle",
    "build_cooccurrence",
    "build_instances",
    "build_vocabulary",
    "content_loss",
    "discriminator_loss",
    "export_rating_tasks",
    "filter_effect_report",
    "generate_corpus",
    "generator_loss",
    "lab_l2",
    "lab_to_srgb",
    "load_feature_extractor",
    "load_image",
    "load_manifest",
    "load_model",
    "load_pair",
    "load_template_bank",
    "luminance",
    "make_texture",
    "make_train_state",
    "perceptual_loss",
    "probe_filter",
    "remap_spread",
    "resize_for_model",
    "resize_to",
    "reverse_pair",
    "run_training",
    "sample_random_text",
    "save_image",
    "save_manifest",
    "save_model",
    "split_text",
    "pretrain_buckets",
    "srgb_to_lab",
    "tokenize",
    "train_step",
]
