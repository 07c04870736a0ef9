__all__ = ['data', 'args', 'exp']
