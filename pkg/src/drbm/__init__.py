"""Binary and multinary restricted Boltzmann machines.

Layers of units taking values in {0..N} are trained by gradient descent
on a contrastive free-energy loss whose analytic gradient reproduces
one-step contrastive divergence.  Exact enumeration oracles back every
piece of the training math at desk scale.
"""

from .activations import (
    BINARY,
    ActivationSpec,
    f_integral,
    f_mean,
    f_variance,
    logit,
    offsets,
    sigmoid,
    softplus,
    sum_sigmoid_mean,
    sum_sigmoid_var,
)
from .conv import (
    conv_contrastive_loss,
    conv_free_energy_integral,
    conv_hidden_mean,
    conv_hidden_pre,
    conv_loss_and_grad,
    conv_loss_gradient,
    conv_output_size,
    conv_reconstruct,
    conv_transpose_pre,
)
from .estimators import DeepBeliefNetwork, MultinaryRBM, linear_probe_accuracy
from .exact import (
    MAX_ENUM_VISIBLE,
    ExactModelReport,
    energy,
    enumerate_binary_states,
    exact_loglik_gradient,
    free_energy,
    free_energy_integral,
    log_likelihood_exact,
    log_partition_exact,
)
from .io import (
    BadMagicError,
    ChecksumError,
    DataFormatError,
    DimensionMismatchError,
    ImageDataset,
    MalformedHeaderError,
    TruncatedFileError,
    UnsupportedMaxvalError,
    UnsupportedVersionError,
    load_idx,
    load_model,
    load_ppm,
    load_ppm_dir,
    map_levels,
    save_model,
    save_ppm,
)
from .loss import (
    LossBatchResult,
    cd1_reference,
    contrastive_loss,
    loss_and_grad,
    loss_gradient,
    reconstruct,
)
from .optim import AdamConfig, AdamState, NumericalError, adam_step, init_adam
from .params import (
    ConvRbmParams,
    DbnModel,
    GradientSet,
    RbmParams,
    init_conv_params,
    init_params,
    validate,
    visible_bias_from_means,
    validate_conv,
    validate_model,
)
from .sampling import (
    RngStream,
    gibbs_chain,
    hidden_mean,
    sample_hidden,
    sample_levels,
    sample_visible,
    visible_mean,
)
from .stack import (
    EpochReport,
    TrainConfig,
    build_dbn,
    forward_means,
    generate,
    parse_architecture,
    reconstruct_model,
    train,
    train_epoch,
    train_layer,
    warm_start_visible,
)
from .verify import CheckResult, expand_to_binary, run_checks

__version__ = "0.1.0"
