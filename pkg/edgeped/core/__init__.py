from edgeped.core.models import BoundingBox, Frame, FrameAnnotation, VideoSequence
