"""
Occupancy grids and the greedy placement policy
===============================================

A bin is a W x H grid of cells.  Items are axis-aligned rectangles placed at
an anchor (their lower-left cell).  The greedy policy picks the anchor whose
rectangle touches the most occupied cells or walls.
"""

import numpy as np

from binpack import (GridBin, ItemSpec, Orientation, Placement, apply_pack, edge_contact_reward,
                     feasibility_mask, greedy_place, utilization)
from binpack.grid import decode_action

# An empty 6 x 4 bin.  Rows print top to bottom.
bin = GridBin.empty(6, 4)
print(bin.render(), end="\n\n")

# Drop a 3 x 1 item in the corner: it touches the floor, the left wall and
# nothing else, so its contact score is 3 + 1.
item = ItemSpec(0, 3, 1)
print("corner score:", edge_contact_reward(bin, 0, 0, (3, 1)))
bin = apply_pack(bin, Placement(item, Orientation.DEG0, 0, 0))

# Where can a 2 x 2 go now?  The mask has one entry per anchor plus a final
# "nowhere" flag.
mask = feasibility_mask(bin, (2, 2))
print("feasible anchors:", [decode_action(int(j), 6, 4) for j in np.flatnonzero(mask[:-1])])

# The greedy choice for it, rotated or not, and the resulting bin.
for size in ((2, 2), (1, 3), (3, 1)):
    d = greedy_place(bin, size)
    print(f"{size}: anchor {decode_action(d.action, 6, 4)} with contact {d.score}")

d = greedy_place(bin, (3, 1))
x, y = decode_action(d.action, 6, 4)
bin = apply_pack(bin, Placement(ItemSpec(1, 3, 1), Orientation.DEG0, x, y))
print()
print(bin.render())
print("utilization:", utilization(bin))
