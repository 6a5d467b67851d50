# coding: utf-8

# # Training method embeddings

# Every name in the call graph gets a vector. Training pulls each vector towards the mean of
# its callees' vectors and each norm towards 1, then pushes vectors away from a few random
# unconnected names.

# In[1]:

import numpy as np

from namerec.acg import AggregatedCallGraph
from namerec.embed import TrainConfig, init_embeddings, loss, train


# A ten-name toy graph.

# In[2]:

edges = [
    ("saveFile", "open"), ("saveFile", "write"), ("saveFile", "close"),
    ("loadFile", "read"), ("loadFile", "parse"), ("loadFile", "close"),
    ("copyFile", "read"), ("copyFile", "write"),
    ("closeAll", "close"), ("closeAll", "flush"),
]
g = AggregatedCallGraph([], edges)
print(g.nodes)


# The untrained table is uniform noise scaled by 1/sqrt(dim).

# In[3]:

t0 = init_embeddings(g, dim=4, seed=0)
print("initial loss", round(loss(t0, g, alpha=0.5), 4))
print("initial norms", np.round(np.linalg.norm(t0.vectors, axis=1), 3))


# In[4]:

cfg = TrainConfig(dim=4, loops=500, alpha=0.5, seed=0, trace_every=50)
result = train(g, cfg)
for step, value in result.loss_trace:
    print(f"step {step:4d}  loss {value:.4f}")


# After training the norms sit close to 1 and callers point roughly where their callees do.

# In[5]:

t = result.table
print("norms", np.round(np.linalg.norm(t.vectors, axis=1), 3))
unit = t.vectors / np.linalg.norm(t.vectors, axis=1, keepdims=True)
sim = unit @ unit.T
i, j = t.index["saveFile"], t.index["copyFile"]
print("cos(saveFile, copyFile) =", round(sim[i, j], 3))


# The same config and seed always reproduce the table bit for bit.

# In[6]:

print(train(g, cfg).table == t)
