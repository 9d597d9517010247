from hypothesis import settings

# sympy cross-checks and modular arithmetic vary a lot in runtime per example
settings.register_profile("learnsep", deadline=None)
settings.load_profile("learnsep")
