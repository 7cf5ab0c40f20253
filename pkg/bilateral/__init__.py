from .teaching import bilateral_step, teach_episode, tracking_residuals
