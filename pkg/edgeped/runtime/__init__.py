from edgeped.runtime import config
