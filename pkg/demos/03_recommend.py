# coding: utf-8

# # Recommending a name for a method body

# A query is just the set of names a body calls. Its vector is the mean of those names'
# vectors, and candidates are ranked by cosine similarity.

# In[1]:

from namerec.acg import build_acg
from namerec.corpus import extract_corpus
from namerec.embed import TrainConfig, train
from namerec.evaluation import plan_synthetic_corpus, render_synthetic_corpus
from namerec.recommend import callees_from_snippet, recommend


# In[2]:

plan = plan_synthetic_corpus(families=6, methods_per_family=10, callee_pool_size=10, seed=1)
records = [r for _u, rs in extract_corpus(render_synthetic_corpus(plan, seed=1)) for r in rs]
table = train(build_acg(records), TrainConfig(dim=32, loops=800, seed=1)).table
print(table)


# Take a body that calls helpers from the first family's pool. One of the names is unknown
# to the table; it is reported back and left out of the mean.

# In[3]:

family = plan.families[0]
snippet = f"""
    {family.pool[1]}(a);
    helper.{family.pool[2]}(s);
    if (ok) {{ {family.pool[3]}(x); }}
    neverSeenBefore();
"""
callees = callees_from_snippet(snippet)
print(sorted(callees))


# In[4]:

result = recommend(table, callees, k=10)
print("skipped:", result.skipped)
for name, score in result.entries:
    print(f"{score:7.4f}  {name}")


# The defined methods among the candidates should come from the same family, since they
# share its verb and noun.

# In[5]:

defined = {r.name for r in records}
print([n for n in result.names if n in defined])
print("family scheme:", family.verb, family.noun)
