# Copyright (c) 2024 smallgain developers.
#
# Licensed under the BSD 3-Clause License
# <LICENSE.rst or https://opensource.org/licenses/BSD-3-Clause>.
# This file may not be copied, modified, or distributed except
# according to those terms.

from smallgain.cli import execute


if __name__ == '__main__':
    execute()
