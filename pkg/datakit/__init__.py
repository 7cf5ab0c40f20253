from .trace import EnvLog, MotionTrace, SideLog, TraceMeta
