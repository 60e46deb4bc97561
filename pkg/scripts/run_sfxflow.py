import sys

import sfxflow

if __name__ == '__main__':
    sys.exit(sfxflow.main())
