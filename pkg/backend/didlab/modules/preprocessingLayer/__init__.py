from .panel_transforms import PanelValidator, aggregate_micro, nabla_means, validate_panel, window_weights

__all__ = ["PanelValidator", "aggregate_micro", "nabla_means", "validate_panel", "window_weights"]
