"""wordbrush: edit an image's visual attributes from a natural-language
description, keeping everything the text does not mention.

The pieces: a bidirectional-LSTM text encoder, word-region attention fused
into a single- or multi-scale image generator, a two-score (realism +
matching) discriminator, an adversarial training engine, evaluation tools,
and a CLI plus HTTP service.
"""

from .attention import (WordAttention, attention_weights, load_attention_map,
                        project_words, save_attention_map, word_context_features)
from .checkpoint import load_checkpoint, load_for_inference, restore_train_state, save_checkpoint
from .data import (CaptionedImage, SyntheticSpec, build_vocabulary, color_oracle,
                   denormalize_image, load_split, normalize_image, synth_generate,
                   to_display_range, write_corpus)
from .discriminator import Discriminator, ScorePair, score
from .errors import (DataError, InsufficientData, InvalidDescription, NumericalFailure,
                     ShapeError, WordbrushError)
from .evaluate import (ChiSquareResult, HeatmapSet, LabelClassifier, ProbeResult,
                       RankingTable, attention_heatmaps, chi_square_independence,
                       interpolate_text, label_entropy_probe, mask_contrast,
                       pixel_losses, rank_aggregate, rank_contingency,
                       save_frame_strip, save_heatmap_grid, shannon_entropy,
                       train_label_classifier)
from .generator import (ImageEncoder, MultiScaleGenerator, SingleScaleGenerator,
                        build_generator, generate, init_gan_weights)
from .inference import Manipulator, load_manipulator
from .losses import (LossReport, LossWeights, discriminator_loss, displayed_reconstruction,
                     generator_loss, reconstruction_loss)
from .text import (TextEncoder, TokenSequence, Vocabulary, batch_tokens, encode_words,
                   tokenize, tokens_to_words)
from .training import (TrainState, TrainingConfig, augment, build_state, effective_lr,
                       make_batch, read_loss_log, run_training, sample_mismatch, train_step)

__version__ = "0.1.0"
