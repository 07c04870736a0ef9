__all__ = ['base', 'double_spend', 'sybil']
