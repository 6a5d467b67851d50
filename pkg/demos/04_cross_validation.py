# coding: utf-8

# # Cross-validated evaluation

# Files are split into folds. For each fold a table is trained on the other folds and every
# method of the held-out files is renamed from its callees. A recommendation counts as
# correct when one of the top ten candidates shares the verb (verb task) or any noun
# (noun task) of the real name.

# In[1]:

import json

from namerec.corpus import MethodRecord, extract_corpus
from namerec.embed import TrainConfig
from namerec.evaluation import categorize, cross_validate, generate_synthetic_corpus


# Methods fall into three categories: getters and setters, methods whose callees already
# mention the right word, and methods where no callee does.

# In[2]:

for name, callees in [("getName", {"x"}), ("parseHeader", {"parseToken"}), ("flushCache", {"write", "clear"})]:
    m = MethodRecord(name, "p", "X.java", frozenset(callees))
    print(f"{name:12s} verb: {categorize(m, 'verb'):14s} noun: {categorize(m, 'noun')}")


# In[3]:

units = generate_synthetic_corpus(families=6, methods_per_family=12, callee_pool_size=10, seed=2)
extracted = extract_corpus(units)
report, tables = cross_validate(extracted, folds=5, seed=7, train_config=TrainConfig(dim=32, loops=500), k=10)
print(report.to_text())


# The JSON form carries the same counts plus exclusion counters. Methods without callees,
# or whose callees were never seen in training, are excluded and counted.

# In[4]:

summary = report.to_dict()
print(json.dumps(summary["tasks"]["verb"], indent=1))
print(summary["exclusions"])


# Per-verb correctness, most frequent verbs first.

# In[5]:

rows = report.per_verb_csv().splitlines()
print(rows[0])
for line in sorted(rows[1:], key=lambda r: -int(r.split(",")[1]))[:8]:
    print(line)
