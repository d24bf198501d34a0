"""
The numpy kernels
=================

Every layer is built from a handful of float32 kernels.  This walks through
them on tiny inputs where the answer can be checked by eye.
"""

import numpy as np

from yolomu import tensor as T

x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
print("input\n", x[0, 0])

# a 3x3 box filter, zero padded
box = np.ones((1, 1, 3, 3), np.float32)
print("3x3 sums\n", T.conv2d(x, box, padding=1)[0, 0])

# stride 2 halves the grid, like the downsampling convs
print("stride-2 sums\n", T.conv2d(x, box, stride=2, padding=1)[0, 0])

# batch norm with running statistics, then SiLU
y = T.batch_norm(x, gamma=[2.0], beta=[0.5], running_mean=[7.5], running_var=[4.0])
print("bn -> silu\n", np.round(T.silu(y)[0, 0], 3))

# SPPF chains three 5x5 max pools; two chained k5 pools equal one k9 pool
p5 = T.max_pool2d(T.max_pool2d(x, 5, 1, 2), 5, 1, 2)
print("k5 twice == k9:", np.array_equal(p5, T.max_pool2d(x, 9, 1, 4)))

# neck plumbing
up = T.upsample_nearest(x, 2)
print("upsampled", up.shape, "concat", T.concat([up, up]).shape)

# softmax over 16 bins, the DFL box encoding
print("softmax of zeros:", T.softmax(np.zeros(16))[:3], "...")
