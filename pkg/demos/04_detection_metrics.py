# coding: utf-8

# # Detection metrics
#
# Detections are matched greedily, highest confidence first, to unmatched
# ground-truth boxes of the same class in the same frame. AP is the 101-point
# interpolated area under the precision/recall curve.

# In[1]:

from drivebridge import average_precision, evaluate, iou
from drivebridge.metrics import ScoredBox, TruthBox

print("IoU of two half-overlapping unit squares:", iou((0, 0, 1, 1), (0.5, 0, 1.5, 1)))


# Three detections against two truths: a hit, a miss, then another hit.

# In[2]:

truths = [TruthBox(0, (0, 0, 1, 1), frame=0), TruthBox(0, (5, 5, 6, 6), frame=0)]
dets = [
    ScoredBox(0, 0.9, (0, 0, 1, 1), frame=0),
    ScoredBox(0, 0.8, (10, 10, 11, 11), frame=0),
    ScoredBox(0, 0.7, (5, 5, 6, 6), frame=0),
]
print(f"AP@0.5 = {average_precision(dets, truths, 0.5):.6f}")
print(evaluate(dets, truths).to_json())
