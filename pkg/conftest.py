# -*- coding: utf-8 -*-
"""测试根目录：把项目根加入 sys.path"""

import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT))
