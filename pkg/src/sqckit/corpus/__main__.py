from .build import write

for p in write():
    print(p.name)
