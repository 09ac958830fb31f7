"""Learned components: flow backends, enhancement/appearance networks,
frozen feature extractors."""

from .alignment import (EnhancementOutput, PairwiseFlows,
                        assemble_enhancement_input, compute_initial_flows,
                        enhance_flows, estimate_window_flows, upsample_window,
                        warp_keyframes)
from .appearance import (APPEARANCE_INPUT_CHANNELS, AppearanceVariant,
                         assemble_appearance_input, estimate_appearance)
from .features import (ContextExtractor, FeatureHandle, Vgg16Features,
                       IMAGENET_MEAN, IMAGENET_STD)
from .flow_estimator import (LUCAS_KANADE, PYRAMID_NETWORK,
                             FlowEstimatorHandle, LucasKanadeEstimator,
                             PyramidFlowNetwork, PyramidNetworkEstimator,
                             create_flow_estimator, estimate_flow,
                             save_pyramid_network)
from .unet import (APPEARANCE_OUT_CHANNELS, DEFAULT_LEVEL_WIDTHS,
                   FLOW_ENHANCER_IN_CHANNELS, FLOW_ENHANCER_OUT_CHANNELS,
                   UNet, UNetConfig, appearance_config, build_unet,
                   flow_enhancer_config, parameter_shapes)

__all__ = [
    "APPEARANCE_INPUT_CHANNELS",
    "APPEARANCE_OUT_CHANNELS",
    "AppearanceVariant",
    "ContextExtractor",
    "DEFAULT_LEVEL_WIDTHS",
    "EnhancementOutput",
    "FLOW_ENHANCER_IN_CHANNELS",
    "FLOW_ENHANCER_OUT_CHANNELS",
    "FeatureHandle",
    "FlowEstimatorHandle",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "LUCAS_KANADE",
    "LucasKanadeEstimator",
    "PYRAMID_NETWORK",
    "PairwiseFlows",
    "PyramidFlowNetwork",
    "PyramidNetworkEstimator",
    "UNet",
    "UNetConfig",
    "Vgg16Features",
    "appearance_config",
    "assemble_appearance_input",
    "assemble_enhancement_input",
    "build_unet",
    "compute_initial_flows",
    "create_flow_estimator",
    "enhance_flows",
    "estimate_appearance",
    "estimate_flow",
    "estimate_window_flows",
    "flow_enhancer_config",
    "parameter_shapes",
    "save_pyramid_network",
    "upsample_window",
    "warp_keyframes",
]
