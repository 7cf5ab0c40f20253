from .playback import (
    CommandStream,
    PlaybackCollection,
    PlaybackShortfall,
    SpeedRatio,
    collect_playbacks,
    playback,
    resample_trace,
    rescale_trace,
)
