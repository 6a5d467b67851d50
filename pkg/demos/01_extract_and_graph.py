# coding: utf-8

# # From source files to a call graph

# Method names are recommended from the names a method body calls. The first step is to pull
# every method definition and its callee names out of a source tree, then merge same-named
# methods into one graph node.

# In[1]:

import io
import tempfile
from pathlib import Path

from namerec.acg import build_acg, write_graph
from namerec.corpus import cleanse, extract_corpus, scan_corpus
from namerec.evaluation import generate_synthetic_corpus, write_units


# A small synthetic corpus keeps this self-contained. Four families of methods share naming
# schemes and each family calls names from its own private helper pool.

# In[2]:

root = Path(tempfile.mkdtemp()) / "corpus"
write_units(generate_synthetic_corpus(families=4, methods_per_family=6, callee_pool_size=8, seed=0), root)
units = scan_corpus(root)
print(len(units), "files;", units[0].path)
print(units[0].text[:600])


# The parser is lexical. Comments and string literals are blanked first, so the decoy calls
# inside them never show up, and `new Helper(...)` counts as object creation, not a call.

# In[3]:

extracted = extract_corpus(units)
kept, dropped = cleanse(extracted)
records = [r for _unit, rs in kept for r in rs]
print(dropped)
for r in records[:5]:
    print(r.name, "->", sorted(r.callees))


# Files in test packages, and files made only of serially numbered methods, are removed
# by the cleansing step. None occur here.

# In[4]:

g = build_acg(records)
print(g)
print("callees of", records[0].name, g.callees(records[0].name))
some_helper = sorted(records[0].callees)[0]
print("callers of", some_helper, g.callers(some_helper))


# The graph file is plain text: a header, one sorted edge per line, then the isolated names.

# In[5]:

buf = io.StringIO()
write_graph(g, buf)
print("\n".join(buf.getvalue().splitlines()[:8]))
